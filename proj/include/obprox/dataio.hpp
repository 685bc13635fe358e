#pragma once

// LIBSVM-format datasets and seeded epoch-wise mini-batch plans.

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "obprox/errors.hpp"
#include "obprox/rng.hpp"

namespace obprox {

using Batch = std::span<const std::size_t>;

/// One row of the design matrix. Indices are 0-based and strictly increasing.
struct SparseExample {
  std::vector<std::size_t> indices;
  std::vector<double> values;
  int label = 1;  // -1 or +1

  std::size_t nnz() const { return indices.size(); }

  bool operator==(const SparseExample&) const = default;
};

/// Immutable after construction; safe to share between threads.
class Dataset {
 public:
  Dataset(std::vector<SparseExample> examples, std::size_t num_features)
      : examples_(std::move(examples)), num_features_(num_features) {
    if (examples_.empty()) throw ContractError("dataset must hold at least one example");
    for (std::size_t r = 0; r < examples_.size(); ++r) {
      const auto& ex = examples_[r];
      if (ex.indices.size() != ex.values.size())
        throw ContractError("example " + std::to_string(r) + ": indices/values length mismatch");
      if (ex.label != -1 && ex.label != 1)
        throw ContractError("example " + std::to_string(r) + ": label must be -1 or +1");
      for (std::size_t p = 0; p < ex.indices.size(); ++p) {
        if (ex.indices[p] >= num_features_)
          throw ContractError("example " + std::to_string(r) + ": feature index out of range");
        if (p > 0 && ex.indices[p] <= ex.indices[p - 1])
          throw ContractError("example " + std::to_string(r) + ": indices not strictly increasing");
      }
    }
  }

  std::size_t num_examples() const { return examples_.size(); }
  std::size_t num_features() const { return num_features_; }
  const SparseExample& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<SparseExample>& examples() const { return examples_; }

  std::size_t nnz() const {
    std::size_t total = 0;
    for (const auto& ex : examples_) total += ex.nnz();
    return total;
  }

 private:
  std::vector<SparseExample> examples_;
  std::size_t num_features_;
};

struct ParseOptions {
  /// Explicit feature count; must be >= the largest index in the file.
  std::optional<std::size_t> num_features;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !token.empty();
}

inline int parse_label(std::string_view token, std::size_t line_no) {
  double v;
  if (!parse_number(token, v)) throw ParseError("non-numeric label '" + std::string(token) + "'", line_no);
  if (v == 1.0) return 1;
  if (v == -1.0 || v == 0.0) return -1;
  throw ParseError("label must be one of +1, 1, -1, 0; got '" + std::string(token) + "'", line_no);
}

inline SparseExample parse_line(std::string_view line, std::size_t line_no, std::size_t& max_index) {
  SparseExample ex;
  std::size_t pos = 0;
  bool have_label = false;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    const auto token = line.substr(pos, end - pos);
    pos = end;
    if (!have_label) {
      ex.label = parse_label(token, line_no);
      have_label = true;
      continue;
    }
    const auto colon = token.find(':');
    if (colon == std::string_view::npos)
      throw ParseError("expected index:value, got '" + std::string(token) + "'", line_no);
    std::size_t index;
    double value;
    if (!parse_number(token.substr(0, colon), index))
      throw ParseError("non-numeric feature index in '" + std::string(token) + "'", line_no);
    if (!parse_number(token.substr(colon + 1), value) || !std::isfinite(value))
      throw ParseError("non-numeric feature value in '" + std::string(token) + "'", line_no);
    if (index == 0) throw ParseError("feature indices are 1-based; got 0", line_no);
    if (!ex.indices.empty() && index - 1 <= ex.indices.back())
      throw ParseError("feature indices must be strictly ascending", line_no);
    ex.indices.push_back(index - 1);
    ex.values.push_back(value);
    max_index = std::max(max_index, index);
  }
  return ex;
}

}  // namespace detail

/// Parses "label idx:val idx:val ..." lines. Blank lines and '#' comments
/// are skipped; labels 0 are mapped to -1.
inline Dataset parse_libsvm(std::istream& in, const ParseOptions& options = {}) {
  std::vector<SparseExample> examples;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    examples.push_back(detail::parse_line(view, line_no, max_index));
  }
  if (examples.empty()) throw ParseError("no examples in input", 0);
  std::size_t n = max_index;
  if (options.num_features) {
    if (*options.num_features < max_index)
      throw ParseError("feature count override " + std::to_string(*options.num_features) +
                           " is smaller than the largest index " + std::to_string(max_index),
                       0);
    n = *options.num_features;
  }
  if (n == 0) throw ParseError("dataset has no features", 0);
  return Dataset(std::move(examples), n);
}

inline Dataset parse_libsvm(std::string_view text, const ParseOptions& options = {}) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, options);
}

/// Reads a plain or gzip-compressed LIBSVM file.
inline Dataset load_libsvm(const std::string& path, const ParseOptions& options = {}) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw Error("cannot open dataset '" + path + "'");
  std::string text;
  std::vector<char> buffer(1 << 16);
  int got;
  while ((got = gzread(file, buffer.data(), static_cast<unsigned>(buffer.size()))) > 0)
    text.append(buffer.data(), static_cast<std::size_t>(got));
  int err = 0;
  const char* msg = got < 0 ? gzerror(file, &err) : nullptr;
  const std::string reason = msg ? msg : "";
  gzclose(file);
  if (got < 0) throw Error("error reading '" + path + "': " + reason);
  return parse_libsvm(std::string_view(text), options);
}

/// Canonical text form: "+1"/"-1" labels, values printed with %.17g.
inline void write_libsvm(const Dataset& data, std::ostream& out) {
  char buf[32];
  for (const auto& ex : data.examples()) {
    out << (ex.label > 0 ? "+1" : "-1");
    for (std::size_t p = 0; p < ex.nnz(); ++p) {
      std::snprintf(buf, sizeof buf, "%.17g", ex.values[p]);
      out << ' ' << ex.indices[p] + 1 << ':' << buf;
    }
    out << '\n';
  }
}

/// min(256, ceil(0.01 N)).
inline std::size_t default_batch_size(std::size_t num_examples) {
  if (num_examples == 0) throw ConfigError("batch size rule needs N >= 1");
  const std::size_t one_percent = (num_examples + 99) / 100;
  return std::min<std::size_t>(256, one_percent);
}

/// A random partition of 0..N-1 into consecutive batches of `batch_size`
/// (the last one possibly shorter).
class BatchPlan {
 public:
  BatchPlan(std::vector<std::size_t> permutation, std::size_t batch_size, std::uint64_t seed)
      : permutation_(std::move(permutation)), batch_size_(batch_size), seed_(seed) {}

  const std::vector<std::size_t>& permutation() const { return permutation_; }
  std::size_t batch_size() const { return batch_size_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t num_batches() const { return (permutation_.size() + batch_size_ - 1) / batch_size_; }

  Batch batch(std::size_t b) const {
    const std::size_t begin = b * batch_size_;
    const std::size_t len = std::min(batch_size_, permutation_.size() - begin);
    return Batch(permutation_).subspan(begin, len);
  }

  std::vector<Batch> batches() const {
    std::vector<Batch> out;
    out.reserve(num_batches());
    for (std::size_t b = 0; b < num_batches(); ++b) out.push_back(batch(b));
    return out;
  }

 private:
  std::vector<std::size_t> permutation_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

/// Deterministic in (seed, epoch_index): the permutation is a Fisher-Yates
/// shuffle driven by mt19937_64 seeded with derive_seed(seed, epoch_index).
inline BatchPlan make_batches(std::size_t num_examples, std::size_t batch_size, std::uint64_t seed,
                              std::uint64_t epoch_index) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (num_examples == 0) throw ConfigError("cannot batch an empty dataset");
  if (batch_size > num_examples)
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds N = " +
                      std::to_string(num_examples));
  std::vector<std::size_t> perm(num_examples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, epoch_index));
  rng.shuffle(std::span<std::size_t>(perm));
  return BatchPlan(std::move(perm), batch_size, seed);
}

inline BatchPlan make_batches(const Dataset& data, std::size_t batch_size, std::uint64_t seed,
                              std::uint64_t epoch_index) {
  return make_batches(data.num_examples(), batch_size, seed, epoch_index);
}

/// 0..N-1 in order, for full-dataset evaluations.
inline std::vector<std::size_t> all_indices(std::size_t num_examples) {
  std::vector<std::size_t> idx(num_examples);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

struct DatasetStats {
  std::size_t num_examples = 0;
  std::size_t num_features = 0;
  std::size_t nnz = 0;
  double design_density_percent = 0.0;
  std::size_t positives = 0;
  double min_value = 0.0;
  double max_value = 0.0;
  bool binary_values = true;
};

inline DatasetStats inspect(const Dataset& data) {
  DatasetStats s;
  s.num_examples = data.num_examples();
  s.num_features = data.num_features();
  s.nnz = data.nnz();
  s.design_density_percent =
      100.0 * static_cast<double>(s.nnz) /
      (static_cast<double>(s.num_examples) * static_cast<double>(s.num_features));
  bool first = true;
  for (const auto& ex : data.examples()) {
    if (ex.label > 0) ++s.positives;
    for (double v : ex.values) {
      if (first) {
        s.min_value = s.max_value = v;
        first = false;
      }
      s.min_value = std::min(s.min_value, v);
      s.max_value = std::max(s.max_value, v);
      if (v != 0.0 && v != 1.0) s.binary_values = false;
    }
  }
  return s;
}

}  // namespace obprox
