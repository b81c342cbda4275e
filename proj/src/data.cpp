// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sfa/errors.hpp"
#include "sfa/rng.hpp"

namespace sfa {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

bool has_gzip_suffix(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".gz" || ext == ".gzip";
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  if (has_gzip_suffix(path)) {
    gzFile file = gzopen(path.string().c_str(), "rb");
    if (file == nullptr) throw IoError("cannot open " + path.string());
    std::uint8_t buf[1 << 16];
    int got = 0;
    while ((got = gzread(file, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + got);
    const bool failed = got < 0;
    gzclose(file);
    if (failed) throw IoError("gzip decode failed for " + path.string());
    return bytes;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& what) {
  if (offset + 4 > bytes.size()) throw FormatError(what + ": truncated header", offset);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::int32_t> sorted_unique(std::vector<std::int32_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.examples = gather_rows(data.examples, rows);
  out.class_count = data.class_count;
  return out;
}

// Seeded shuffle of `rows`, then the first floor(n/6) become the eval split.
void holdout_split(const Dataset& data, std::vector<std::size_t> rows, std::uint64_t seed, Task& task) {
  Rng rng(seed);
  rng.shuffle(rows);
  const std::size_t n_eval = rows.size() / 6;
  task.eval = subset(data, std::span(rows).first(n_eval));
  task.train = subset(data, std::span(rows).subspan(n_eval));
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(examples.inputs.rows()) != examples.labels.size()) {
    throw DimensionError("dataset rows and labels disagree");
  }
  for (const auto y : examples.labels) {
    if (y < 0 || y >= class_count) throw DomainError("label " + std::to_string(y) + " outside class space");
  }
}

std::size_t RehearsalBuffer::total_size() const {
  std::size_t n = 0;
  for (const auto& d : store) n += d.size();
  return n;
}

Dataset concatenate(const std::vector<const Dataset*>& parts) {
  Dataset out;
  if (parts.empty()) return out;
  std::size_t rows = 0;
  const auto dim = parts.front()->examples.inputs.cols();
  out.class_count = parts.front()->class_count;
  for (const auto* p : parts) {
    if (p->size() > 0 && p->examples.inputs.cols() != dim) throw DimensionError("concatenate: feature dims differ");
    if (p->class_count != out.class_count) throw DimensionError("concatenate: class spaces differ");
    rows += p->size();
  }
  out.examples.inputs.resize(static_cast<Eigen::Index>(rows), dim);
  out.examples.labels.reserve(rows);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    if (p->size() == 0) continue;
    out.examples.inputs.middleRows(at, p->examples.inputs.rows()) = p->examples.inputs;
    at += p->examples.inputs.rows();
    out.examples.labels.insert(out.examples.labels.end(), p->examples.labels.begin(), p->examples.labels.end());
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_all(images_path);
  const auto labels = read_all(labels_path);
  const std::string img_name = images_path.filename().string();
  const std::string lbl_name = labels_path.filename().string();

  if (read_be32(images, 0, img_name) != kIdxImagesMagic) throw FormatError(img_name + ": bad image magic", 0);
  if (read_be32(labels, 0, lbl_name) != kIdxLabelsMagic) throw FormatError(lbl_name + ": bad label magic", 0);

  const std::size_t n = read_be32(images, 4, img_name);
  const std::size_t rows = read_be32(images, 8, img_name);
  const std::size_t cols = read_be32(images, 12, img_name);
  const std::size_t n_labels = read_be32(labels, 4, lbl_name);
  if (n_labels != n) {
    throw FormatError(lbl_name + ": label count " + std::to_string(n_labels) + " does not match image count " +
                          std::to_string(n),
                      4);
  }
  const std::size_t dim = rows * cols;
  if (images.size() < 16 + n * dim) throw FormatError(img_name + ": truncated pixel payload", images.size());
  if (labels.size() < 8 + n) throw FormatError(lbl_name + ": truncated label payload", labels.size());

  Dataset data;
  data.class_count = 0;
  data.examples.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  data.examples.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* px = images.data() + 16 + i * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      data.examples.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = px[j] / 255.0;
    }
    data.examples.labels[i] = labels[8 + i];
    data.class_count = std::max(data.class_count, static_cast<std::int32_t>(labels[8 + i]) + 1);
  }
  // MNIST-style files always carry the full digit space even if a slice does not.
  data.class_count = std::max(data.class_count, 10);
  return data;
}

TaskStream split_by_labels(const Dataset& data, const std::vector<std::vector<std::int32_t>>& groups,
                           std::uint64_t seed) {
  data.validate();
  std::set<std::int32_t> seen;
  for (const auto& g : groups) {
    if (g.empty()) throw DomainError("split_by_labels: empty label group");
    for (const auto y : sorted_unique(g)) {
      if (y < 0 || y >= data.class_count) throw DomainError("split_by_labels: label outside class space");
      if (!seen.insert(y).second) throw DomainError("split_by_labels: label " + std::to_string(y) + " in two groups");
    }
  }

  TaskStream stream;
  stream.class_count = data.class_count;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    Task task;
    task.labels = sorted_unique(groups[k]);
    task.name = "task" + std::to_string(k);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (std::binary_search(task.labels.begin(), task.labels.end(), data.examples.labels[i])) rows.push_back(i);
    }
    holdout_split(data, std::move(rows), derive_seed(seed, k), task);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream synthetic_gaussian_tasks(const SyntheticStreamOptions& o) {
  if (o.num_tasks == 0 || o.classes_per_task == 0 || o.dim == 0 || o.n_per_class == 0) {
    throw DomainError("synthetic_gaussian_tasks: all counts must be positive");
  }
  if (!(o.separation >= 0.0) || !std::isfinite(o.separation)) {
    throw DomainError("synthetic_gaussian_tasks: separation must be finite and >= 0");
  }
  const std::size_t classes = o.num_tasks * o.classes_per_task;
  Rng mean_rng(derive_seed(o.seed, 0x6d65616e));
  Matrix means(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(o.dim));
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    for (Eigen::Index d = 0; d < means.cols(); ++d) means(c, d) = mean_rng.uniform(0.0, o.separation);
  }

  TaskStream stream;
  stream.class_count = static_cast<std::int32_t>(classes);
  for (std::size_t k = 0; k < o.num_tasks; ++k) {
    Dataset all;
    all.class_count = stream.class_count;
    const std::size_t n = o.classes_per_task * o.n_per_class;
    all.examples.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o.dim));
    all.examples.labels.resize(n);
    Rng rng(derive_seed(o.seed, 0x7461736b, k));
    Task task;
    task.name = "task" + std::to_string(k);
    std::size_t row = 0;
    for (std::size_t j = 0; j < o.classes_per_task; ++j) {
      const auto c = static_cast<std::int32_t>(k * o.classes_per_task + j);
      task.labels.push_back(c);
      for (std::size_t i = 0; i < o.n_per_class; ++i, ++row) {
        for (std::size_t d = 0; d < o.dim; ++d) {
          all.examples.inputs(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d)) = means(c, d) + rng.normal();
        }
        all.examples.labels[row] = c;
      }
    }
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    holdout_split(all, std::move(rows), derive_seed(o.seed, 0x686f6c64, k), task);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

RehearsalBuffer buffer_update(const RehearsalBuffer& buffer, const Dataset& finished_task, std::size_t per_task_cap) {
  RehearsalBuffer out = buffer;
  const std::size_t keep = std::min(per_task_cap, finished_task.size());
  if (keep == 0) return out;
  Rng rng(derive_seed(buffer.retention_seed, buffer.store.size()));
  const auto rows = rng.sample_without_replacement(finished_task.size(), keep);
  out.store.push_back(subset(finished_task, rows));
  return out;
}

std::size_t past_rows_for(std::size_t n, double past_fraction) {
  if (!(past_fraction >= 0.0 && past_fraction < 1.0)) {
    throw DomainError("past_fraction must lie in [0, 1)");
  }
  if (past_fraction == 0.0) return 0;
  const double exact = static_cast<double>(n) * past_fraction / (1.0 - past_fraction);
  // The tolerance absorbs representation error such as 900*0.1/0.9 = 100.00000000000001.
  return static_cast<std::size_t>(std::ceil(exact - 1e-9));
}

Dataset mix_with_buffer(const Dataset& current, const RehearsalBuffer& buffer, double past_fraction,
                        std::uint64_t seed) {
  const std::size_t n_past = past_rows_for(current.size(), past_fraction);
  std::vector<const Dataset*> parts;
  for (const auto& d : buffer.store) parts.push_back(&d);
  if (past_fraction > 0.0 && buffer.total_size() == 0) {
    throw DomainError("mix_with_buffer: past_fraction > 0 with an empty rehearsal buffer");
  }

  Rng rng(seed);
  Dataset past_rows;
  if (n_past > 0) {
    const Dataset pool = concatenate(parts);
    std::vector<std::size_t> picks;
    if (n_past <= pool.size()) {
      picks = rng.sample_without_replacement(pool.size(), n_past);
    } else {
      picks.resize(n_past);
      for (auto& p : picks) p = static_cast<std::size_t>(rng.below(pool.size()));
    }
    past_rows = subset(pool, picks);
  }

  Dataset mixed = n_past > 0 ? concatenate({&current, &past_rows}) : current;
  std::vector<std::size_t> order(mixed.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  return subset(mixed, order);
}

}  // namespace sfa
