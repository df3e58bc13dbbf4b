/*
 * Copyright 2026 The trmml Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "trmml/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "trmml/math.hpp"
#include "trmml/random.hpp"
#include "trmml/tensor_io.hpp"

namespace trmml {
namespace {

void validate(const SyntheticSpec& s) {
  const std::size_t cells = s.grid_h * s.grid_w;
  if (s.n_images == 0 || s.num_classes == 0 || cells == 0 || s.patch == 0 ||
      s.channels == 0) {
    throw Error(Errc::kSpecInfeasible, "all sizes must be positive");
  }
  if (s.objects_min < 1 || s.objects_min > s.objects_max ||
      s.objects_max > s.num_classes) {
    throw Error(Errc::kSpecInfeasible,
                "objects per image must satisfy 1 <= min <= max <= C");
  }
  if (s.objects_max + s.clutter > cells) {
    throw Error(Errc::kSpecInfeasible,
                std::to_string(s.objects_max + s.clutter) +
                    " objects do not fit in " + std::to_string(cells) + " cells");
  }
  if (!(s.noise_std >= 0.0) || !(s.clutter_scale >= 0.0)) {
    throw Error(Errc::kSpecInfeasible, "noise_std and clutter_scale must be >= 0");
  }
}

void stamp(Tensor& images, std::size_t i, const SyntheticSpec& s,
           std::size_t cell, ConstVec pattern) {
  const std::size_t gi = cell / s.grid_w, gj = cell % s.grid_w;
  const std::size_t H = s.image_height(), W = s.image_width();
  std::size_t k = 0;
  for (std::size_t y = 0; y < s.patch; ++y) {
    for (std::size_t x = 0; x < s.patch; ++x) {
      for (std::size_t ch = 0; ch < s.channels; ++ch) {
        const std::size_t py = gi * s.patch + y, px = gj * s.patch + x;
        images[((i * H + py) * W + px) * s.channels + ch] += pattern[k++];
      }
    }
  }
}

}  // namespace

SyntheticSpec SyntheticSpec::from_config(const KeyValueConfig& cfg) {
  SyntheticSpec s;
  s.n_images = cfg.get_size("n_images", s.n_images);
  s.num_classes = cfg.get_size("num_classes", s.num_classes);
  s.grid_h = cfg.get_size("grid_h", s.grid_h);
  s.grid_w = cfg.get_size("grid_w", s.grid_w);
  s.patch = cfg.get_size("patch", s.patch);
  s.channels = cfg.get_size("channels", s.channels);
  s.objects_min = cfg.get_size("objects_min", s.objects_min);
  s.objects_max = cfg.get_size("objects_max", s.objects_max);
  s.noise_std = cfg.get_double("noise_std", s.noise_std);
  s.clutter = cfg.get_size("clutter", s.clutter);
  s.clutter_scale = cfg.get_double("clutter_scale", s.clutter_scale);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  return s;
}

void SyntheticSpec::to_config(KeyValueConfig& cfg) const {
  cfg.set("n_images", static_cast<std::uint64_t>(n_images));
  cfg.set("num_classes", static_cast<std::uint64_t>(num_classes));
  cfg.set("grid_h", static_cast<std::uint64_t>(grid_h));
  cfg.set("grid_w", static_cast<std::uint64_t>(grid_w));
  cfg.set("patch", static_cast<std::uint64_t>(patch));
  cfg.set("channels", static_cast<std::uint64_t>(channels));
  cfg.set("objects_min", static_cast<std::uint64_t>(objects_min));
  cfg.set("objects_max", static_cast<std::uint64_t>(objects_max));
  cfg.set("noise_std", noise_std);
  cfg.set("clutter", static_cast<std::uint64_t>(clutter));
  cfg.set("clutter_scale", clutter_scale);
  cfg.set("seed", seed);
}

Tensor class_patterns(const SyntheticSpec& spec) {
  const std::size_t C = spec.num_classes, D = spec.pattern_dim();
  auto rng = make_rng(spec.seed, 1000);
  Tensor p = normal_tensor({C, D}, 0.0, 1.0, rng);
  const double target = std::sqrt(static_cast<double>(D));
  for (std::size_t c = 0; c < C; ++c) {
    auto row = p.row(c);
    if (c < D) {
      for (std::size_t prev = 0; prev < c; ++prev) {
        axpy(-dot(row, p.row(prev)) / (target * target), p.row(prev), row);
      }
    }
    const double n = l2_norm(row);
    for (auto& v : row) v *= target / n;
  }
  return p;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const Tensor patterns = class_patterns(spec);
  const std::size_t n = spec.n_images, C = spec.num_classes;
  const std::size_t cells = spec.grid_h * spec.grid_w, D = spec.pattern_dim();
  Dataset ds;
  ds.images = Tensor({n, spec.image_height(), spec.image_width(), spec.channels});
  ds.y_full = LabelMatrix(n, C);
  std::vector<std::size_t> classes(C), cell_ids(cells);
  std::vector<double> clutter(D);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = make_rng(spec.seed, 2000 + i);
    std::uniform_int_distribution<std::size_t> count(spec.objects_min,
                                                     spec.objects_max);
    const std::size_t k = count(rng);
    std::iota(classes.begin(), classes.end(), std::size_t{0});
    std::iota(cell_ids.begin(), cell_ids.end(), std::size_t{0});
    std::shuffle(classes.begin(), classes.end(), rng);
    std::shuffle(cell_ids.begin(), cell_ids.end(), rng);
    for (std::size_t c = 0; c < C; ++c) ds.y_full(i, c) = -1;
    for (std::size_t j = 0; j < k; ++j) {
      ds.y_full(i, classes[j]) = 1;
      stamp(ds.images, i, spec, cell_ids[j], patterns.row(classes[j]));
    }
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < spec.clutter; ++j) {
      for (auto& v : clutter) v = unit(rng);
      const double scale = spec.clutter_scale *
                           std::sqrt(static_cast<double>(D)) / l2_norm(clutter);
      for (auto& v : clutter) v *= scale;
      stamp(ds.images, i, spec, cell_ids[k + j], clutter);
    }
    if (spec.noise_std > 0.0) {
      std::normal_distribution<double> noise(0.0, spec.noise_std);
      auto img = ds.images.row(i);
      for (auto& v : img) v += noise(rng);
    }
  }
  ds.y_obs = ds.y_full;
  return ds;
}

LabelMatrix mask_partial(const LabelMatrix& full, double ratio,
                         std::uint64_t seed, bool stratified) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(Errc::kInvalidRatio, "retention ratio " + std::to_string(ratio) +
                                         " outside (0, 1]");
  }
  const std::size_t n = full.rows(), C = full.cols();
  LabelMatrix out(n, C);
  auto rng = make_rng(seed, 3000);
  if (!stratified) {
    const auto keep = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(n * C)));
    std::vector<std::size_t> idx(n * C);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < keep; ++j) {
      out(idx[j] / C, idx[j] % C) = full(idx[j] / C, idx[j] % C);
    }
    return out;
  }
  const auto keep =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> rows(n);
  for (std::size_t c = 0; c < C; ++c) {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t j = 0; j < keep; ++j) out(rows[j], c) = full(rows[j], c);
  }
  return out;
}

LabelMatrix mask_single_positive(const LabelMatrix& full, std::uint64_t seed) {
  const std::size_t n = full.rows(), C = full.cols();
  LabelMatrix out(n, C);
  auto rng = make_rng(seed, 4000);
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < n; ++i) {
    positives.clear();
    for (std::size_t c = 0; c < C; ++c) {
      if (full(i, c) == 1) positives.push_back(c);
    }
    if (positives.empty()) {
      throw Error(Errc::kNoPositiveAvailable,
                  "row " + std::to_string(i) + " has no positive label");
    }
    std::uniform_int_distribution<std::size_t> pick(0, positives.size() - 1);
    out(i, positives[pick(rng)]) = 1;
  }
  return out;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  auto gather = [&](const Tensor& t) {
    if (t.empty()) return Tensor();
    Shape shape = t.shape();
    shape[0] = indices.size();
    Tensor r(shape);
    const std::size_t stride = t.row_size();
    for (std::size_t j = 0; j < indices.size(); ++j) {
      auto src = t.row(indices[j]);
      std::copy(src.begin(), src.end(), r.data().begin() + j * stride);
    }
    return r;
  };
  out.images = gather(ds.images);
  out.features = gather(ds.features);
  out.y_full = ds.y_full.gather(indices);
  out.y_obs = ds.y_obs.gather(indices);
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_test) {
  if (n_test == 0 || n_test >= ds.size()) {
    throw Error(Errc::kSpecInfeasible, "test split must leave both parts non-empty");
  }
  std::vector<std::size_t> train(ds.size() - n_test), test(n_test);
  std::iota(train.begin(), train.end(), std::size_t{0});
  std::iota(test.begin(), test.end(), ds.size() - n_test);
  return {subset(ds, train), subset(ds, test)};
}

std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const Dataset& train, const Dataset& test,
                                    const KeyValueConfig& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(Errc::kIoError, "cannot create directory " + dir.string());
  }
  KeyValueConfig manifest = extra;
  manifest.set("format", std::string("trm-dataset-1"));
  manifest.set("num_classes", static_cast<std::uint64_t>(train.num_classes()));
  auto put = [&](const std::string& key, const Tensor& t) {
    const std::string file = key + ".trm";
    write_tensor(dir / file, t);
    manifest.set(key, file);
  };
  for (const auto& [prefix, ds] :
       {std::pair<std::string, const Dataset*>{"train", &train}, {"test", &test}}) {
    if (ds->has_features()) {
      put(prefix + "_features", ds->features);
    } else {
      put(prefix + "_images", ds->images);
    }
    put(prefix + "_labels_full", ds->y_full.to_tensor());
    put(prefix + "_labels_observed", ds->y_obs.to_tensor());
  }
  const auto path = dir / "manifest.txt";
  manifest.save(path);
  return path;
}

DatasetBundle load_dataset(const std::filesystem::path& manifest_path) {
  DatasetBundle bundle;
  bundle.manifest = KeyValueConfig::load(manifest_path);
  const auto base = manifest_path.parent_path();
  auto load_split = [&](const std::string& prefix) {
    Dataset ds;
    if (auto f = bundle.manifest.get(prefix + "_features")) {
      ds.features = read_tensor(base / *f);
    } else {
      ds.images = read_tensor(base / bundle.manifest.require(prefix + "_images"));
    }
    ds.y_full = LabelMatrix::from_tensor(
        read_tensor(base / bundle.manifest.require(prefix + "_labels_full")));
    if (auto f = bundle.manifest.get(prefix + "_labels_observed")) {
      ds.y_obs = LabelMatrix::from_tensor(read_tensor(base / *f));
    } else {
      ds.y_obs = ds.y_full;
    }
    const std::size_t n = ds.has_features() ? ds.features.dim(0) : ds.images.dim(0);
    if (n != ds.y_full.rows() || ds.y_obs.rows() != n ||
        ds.y_obs.cols() != ds.y_full.cols()) {
      throw Error(Errc::kShapeMismatch, prefix + " split sizes disagree");
    }
    return ds;
  };
  bundle.train = load_split("train");
  bundle.test = load_split("test");
  return bundle;
}

}  // namespace trmml
