#pragma once

// Scenario dataset: N uniform states over X and, for each, N_hat one-step
// successors. Successor j of sample i is always step(x_i, noise_seed(run, i, j)),
// so any chunking or worker count reproduces the same bytes.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "scbc/core.hpp"
#include "scbc/rng.hpp"
#include "scbc/systems.hpp"

namespace scbc {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioDataset {
  std::size_t dimension = 0;
  std::size_t n_hat = 0;
  std::uint64_t run_seed = 0;
  std::uint64_t digest = 0;
  /// Compact datasets keep the mean successor features instead of raw successors.
  bool compact = false;
  /// Basis of the stored features (compact) or the basis degree recorded in the header.
  MonomialBasis basis;
  bool complete = true;

  std::vector<double> samples;        // N * n
  std::vector<double> successors;     // N * n_hat * n (raw)
  std::vector<double> mean_features;  // N * Q (compact)

  std::size_t size() const { return dimension == 0 ? 0 : samples.size() / dimension; }

  std::span<const double> sample(std::size_t i) const {
    return {samples.data() + i * dimension, dimension};
  }
  std::span<const double> successor(std::size_t i, std::size_t j) const {
    return {successors.data() + (i * n_hat + j) * dimension, dimension};
  }
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Uniform draw of sample i; coordinate d uses its own counter stream.
inline void draw_state(const Region& x_region, std::uint64_t run_seed, std::uint64_t i,
                       std::span<double> out) {
  for (std::size_t d = 0; d < x_region.dimension(); ++d) {
    const double lo = x_region.lower()[d];
    const double hi = x_region.upper()[d];
    const double u = rng::to_unit(rng::state_seed(run_seed, i, d));
    out[d] = lo == hi ? lo : std::min(hi, lo + (hi - lo) * u);
  }
}

inline std::vector<double> draw_states(const Region& x_region, std::size_t n,
                                       std::uint64_t run_seed, std::uint64_t first_index = 0) {
  detail::require(n >= 1, "draw_states: sample count must be >= 1");
  const std::size_t dim = x_region.dimension();
  std::vector<double> out(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    draw_state(x_region, run_seed, first_index + i, {out.data() + i * dim, dim});
  }
  return out;
}

struct CollectOptions {
  /// When set, store mean successor features over this basis (compact mode).
  std::optional<MonomialBasis> compact_basis;
  unsigned workers = 1;
};

namespace detail {

/// Runs body(lo, hi) over [begin, end) split into contiguous ranges.
inline void parallel_ranges(std::size_t begin, std::size_t end, unsigned workers,
                            const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t n = end - begin;
  workers = std::max(1u, workers);
  if (workers == 1 || n < 2 * workers) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t per = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = begin + w * per;
    const std::size_t hi = std::min(end, lo + per);
    if (lo >= hi) break;
    threads.emplace_back([&, w, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Fills successors or mean features for samples [first, first+count) whose
/// states sit in `states` (count * n). Output buffers are chunk-local.
inline void compute_successors(const BlackBoxSystem& sys, std::span<const double> states,
                               std::uint64_t first, std::size_t count, std::size_t n_hat,
                               std::uint64_t run_seed, const CollectOptions& opt,
                               std::span<double> raw_out, std::span<double> feat_out) {
  const std::size_t dim = sys.state_dimension;
  parallel_ranges(0, count, opt.workers, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> next(dim);
    std::vector<double> feat;
    std::vector<double> acc;
    const std::size_t q = opt.compact_basis ? opt.compact_basis->size() : 0;
    if (q) {
      feat.resize(q);
      acc.resize(q);
    }
    for (std::size_t s = lo; s < hi; ++s) {
      std::span<const double> x{states.data() + s * dim, dim};
      const std::uint64_t i = first + s;
      if (q) std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < n_hat; ++j) {
        const std::uint64_t seed = rng::noise_seed(run_seed, i, j);
        if (q) {
          step(sys, x, seed, next);
          opt.compact_basis->features(next, feat);
          for (std::size_t t = 0; t < q; ++t) acc[t] += feat[t];
        } else {
          step(sys, x, seed, raw_out.subspan((s * n_hat + j) * dim, dim));
        }
      }
      if (q) {
        const double inv = 1.0 / static_cast<double>(n_hat);
        for (std::size_t t = 0; t < q; ++t) feat_out[s * q + t] = acc[t] * inv;
      }
    }
  });
}

}  // namespace detail

/// In-memory dataset for the given samples.
inline ScenarioDataset collect_successors(const BlackBoxSystem& sys,
                                          std::span<const double> samples, std::size_t n_hat,
                                          std::uint64_t run_seed,
                                          const CollectOptions& opt = {}) {
  detail::require(n_hat >= 1, "collect_successors: n_hat must be >= 1");
  const std::size_t dim = sys.state_dimension;
  detail::require(dim > 0 && samples.size() % dim == 0,
                  "collect_successors: sample buffer does not match state dimension");
  if (opt.compact_basis) {
    detail::require_dim(opt.compact_basis->dimension(), dim, "collect_successors(basis)");
  }
  ScenarioDataset ds;
  ds.dimension = dim;
  ds.n_hat = n_hat;
  ds.run_seed = run_seed;
  ds.compact = opt.compact_basis.has_value();
  if (ds.compact) ds.basis = *opt.compact_basis;
  ds.samples.assign(samples.begin(), samples.end());
  const std::size_t n = samples.size() / dim;
  if (ds.compact) {
    ds.mean_features.resize(n * ds.basis.size());
  } else {
    ds.successors.resize(n * n_hat * dim);
  }
  detail::compute_successors(sys, samples, 0, n, n_hat, run_seed, opt, ds.successors,
                             ds.mean_features);
  return ds;
}

/// (1/N_hat) sum_j features(successor_ij): the row that makes the empirical
/// expectation constraint affine in the coefficients.
inline std::vector<double> empirical_successor_features(const ScenarioDataset& ds,
                                                        const MonomialBasis& basis,
                                                        std::size_t i) {
  detail::require(i < ds.size(), "empirical_successor_features: index out of range");
  detail::require_dim(basis.dimension(), ds.dimension, "empirical_successor_features");
  const std::size_t q = basis.size();
  if (ds.compact) {
    detail::require(ds.basis == basis,
                    "empirical_successor_features: compact dataset stores another basis");
    return {ds.mean_features.begin() + static_cast<std::ptrdiff_t>(i * q),
            ds.mean_features.begin() + static_cast<std::ptrdiff_t>((i + 1) * q)};
  }
  std::vector<double> acc(q, 0.0);
  std::vector<double> feat(q);
  for (std::size_t j = 0; j < ds.n_hat; ++j) {
    basis.features(ds.successor(i, j), feat);
    for (std::size_t t = 0; t < q; ++t) acc[t] += feat[t];
  }
  const double inv = 1.0 / static_cast<double>(ds.n_hat);
  for (double& v : acc) v *= inv;
  return acc;
}

// ---------------------------------------------------------------------------
// Dataset file (BCDS1)
// ---------------------------------------------------------------------------
//
// Header, 56 bytes, little-endian:
//   0  char[5]  "BCDS1"
//   5  u8       flags (bit 0: compact, bit 1: complete)
//   6  u16      reserved (0)
//   8  u32      n (state dimension)
//   12 u32      k (basis degree)
//   16 u64      N
//   24 u64      N_hat
//   32 u64      run_seed
//   40 u64      config digest
//   48 u64      records written
// Records: n reals (state), then N_hat*n reals (raw) or Q reals (compact).

struct DatasetHeader {
  bool compact = false;
  bool complete = false;
  std::uint32_t dimension = 0;
  std::uint32_t degree = 0;
  std::uint64_t n = 0;
  std::uint64_t n_hat = 0;
  std::uint64_t run_seed = 0;
  std::uint64_t digest = 0;
  std::uint64_t written = 0;

  std::size_t record_reals() const {
    const std::size_t q = compact ? binomial(dimension + degree, degree) : 0;
    return dimension + (compact ? q : n_hat * dimension);
  }
};

inline constexpr std::size_t kDatasetHeaderBytes = 56;

namespace detail {

inline void put_u64(unsigned char* p, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) p[b] = static_cast<unsigned char>(v >> (8 * b));
}
inline void put_u32(unsigned char* p, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) p[b] = static_cast<unsigned char>(v >> (8 * b));
}
inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}
inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

inline std::array<unsigned char, kDatasetHeaderBytes> encode_header(const DatasetHeader& h) {
  std::array<unsigned char, kDatasetHeaderBytes> buf{};
  std::memcpy(buf.data(), "BCDS1", 5);
  buf[5] = static_cast<unsigned char>((h.compact ? 1 : 0) | (h.complete ? 2 : 0));
  put_u32(buf.data() + 8, h.dimension);
  put_u32(buf.data() + 12, h.degree);
  put_u64(buf.data() + 16, h.n);
  put_u64(buf.data() + 24, h.n_hat);
  put_u64(buf.data() + 32, h.run_seed);
  put_u64(buf.data() + 40, h.digest);
  put_u64(buf.data() + 48, h.written);
  return buf;
}

inline DatasetHeader decode_header(const unsigned char* buf) {
  if (std::memcmp(buf, "BCDS1", 5) != 0) throw DatasetError("dataset: bad magic");
  DatasetHeader h;
  h.compact = (buf[5] & 1) != 0;
  h.complete = (buf[5] & 2) != 0;
  h.dimension = get_u32(buf + 8);
  h.degree = get_u32(buf + 12);
  h.n = get_u64(buf + 16);
  h.n_hat = get_u64(buf + 24);
  h.run_seed = get_u64(buf + 32);
  h.digest = get_u64(buf + 40);
  h.written = get_u64(buf + 48);
  return h;
}

inline void append_reals(std::vector<unsigned char>& out, std::span<const double> v) {
  const std::size_t at = out.size();
  out.resize(at + 8 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    put_u64(out.data() + at + 8 * i, std::bit_cast<std::uint64_t>(v[i]));
  }
}

}  // namespace detail

inline DatasetHeader read_dataset_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("dataset: cannot open " + path.string());
  unsigned char buf[kDatasetHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(buf), kDatasetHeaderBytes)) {
    throw DatasetError("dataset: truncated header in " + path.string());
  }
  return detail::decode_header(buf);
}

struct DatasetBuildSpec {
  Region state_region;
  std::size_t n = 0;
  std::size_t n_hat = 0;
  std::uint64_t run_seed = 0;
  std::uint64_t digest = 0;
  unsigned degree = 0;
  bool compact = false;
  std::size_t chunk_size = std::size_t{1} << 16;
  unsigned workers = 1;
};

struct DatasetBuildResult {
  DatasetHeader header;
  bool resumed = false;
  std::uint64_t resumed_from = 0;
  std::string error;  // non-empty when the build stopped early
};

/// Streams the dataset to `path` chunk by chunk. An existing incomplete file
/// with an identical header is resumed from its last fully written chunk.
/// Failures leave a valid, incomplete file behind and are reported in the
/// result rather than thrown.
inline DatasetBuildResult build_dataset_file(
    const std::filesystem::path& path, const BlackBoxSystem& sys, const DatasetBuildSpec& spec,
    const std::function<void(std::uint64_t, std::uint64_t)>& progress = {}) {
  detail::require(spec.n >= 1 && spec.n_hat >= 1, "build_dataset_file: counts must be >= 1");
  detail::require_dim(spec.state_region.dimension(), sys.state_dimension, "build_dataset_file");
  detail::require(spec.chunk_size >= 1, "build_dataset_file: chunk size must be >= 1");

  DatasetHeader h;
  h.compact = spec.compact;
  h.dimension = static_cast<std::uint32_t>(sys.state_dimension);
  h.degree = spec.degree;
  h.n = spec.n;
  h.n_hat = spec.n_hat;
  h.run_seed = spec.run_seed;
  h.digest = spec.digest;

  DatasetBuildResult result;
  const std::size_t rec_bytes = 8 * h.record_reals();

  if (std::filesystem::exists(path)) {
    const DatasetHeader old = read_dataset_header(path);
    DatasetHeader cmp = old;
    cmp.complete = false;
    cmp.written = 0;
    if (detail::encode_header(cmp) != detail::encode_header(h)) {
      throw DatasetError("dataset: existing file " + path.string() +
                         " was built for a different configuration");
    }
    if (old.complete) {
      result.header = old;
      result.resumed = true;
      result.resumed_from = old.written;
      return result;
    }
    h.written = std::min<std::uint64_t>(
        old.written, (std::filesystem::file_size(path) - kDatasetHeaderBytes) / rec_bytes);
    std::filesystem::resize_file(path, kDatasetHeaderBytes + h.written * rec_bytes);
    result.resumed = true;
    result.resumed_from = h.written;
  } else {
    std::ofstream create(path, std::ios::binary);
    if (!create) throw DatasetError("dataset: cannot create " + path.string());
    auto buf = detail::encode_header(h);
    create.write(reinterpret_cast<const char*>(buf.data()), buf.size());
  }

  std::fstream io(path, std::ios::binary | std::ios::in | std::ios::out);
  if (!io) throw DatasetError("dataset: cannot open " + path.string());
  auto write_header = [&] {
    auto buf = detail::encode_header(h);
    io.seekp(0);
    io.write(reinterpret_cast<const char*>(buf.data()), buf.size());
    io.flush();
  };

  CollectOptions opt;
  opt.workers = spec.workers;
  if (spec.compact) opt.compact_basis = MonomialBasis(sys.state_dimension, spec.degree);
  const std::size_t dim = sys.state_dimension;
  const std::size_t q = spec.compact ? opt.compact_basis->size() : 0;

  std::vector<unsigned char> bytes;
  try {
    while (h.written < h.n) {
      const std::uint64_t first = h.written;
      const std::size_t count =
          static_cast<std::size_t>(std::min<std::uint64_t>(spec.chunk_size, h.n - first));
      std::vector<double> states = draw_states(spec.state_region, count, spec.run_seed, first);
      std::vector<double> raw(spec.compact ? 0 : count * spec.n_hat * dim);
      std::vector<double> feat(spec.compact ? count * q : 0);
      detail::compute_successors(sys, states, first, count, spec.n_hat, spec.run_seed, opt, raw,
                                 feat);
      bytes.clear();
      bytes.reserve(count * rec_bytes);
      for (std::size_t s = 0; s < count; ++s) {
        detail::append_reals(bytes, {states.data() + s * dim, dim});
        if (spec.compact) {
          detail::append_reals(bytes, {feat.data() + s * q, q});
        } else {
          detail::append_reals(bytes, {raw.data() + s * spec.n_hat * dim, spec.n_hat * dim});
        }
      }
      io.seekp(static_cast<std::streamoff>(kDatasetHeaderBytes + first * rec_bytes));
      io.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
      if (!io) throw DatasetError("dataset: write failed");
      h.written = first + count;
      write_header();
      if (progress) progress(h.written, h.n);
    }
    h.complete = true;
    write_header();
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  result.header = h;
  return result;
}

/// Loads a complete dataset file into memory.
inline ScenarioDataset read_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("dataset: cannot open " + path.string());
  unsigned char hb[kDatasetHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(hb), kDatasetHeaderBytes)) {
    throw DatasetError("dataset: truncated header");
  }
  const DatasetHeader h = detail::decode_header(hb);
  ScenarioDataset ds;
  ds.dimension = h.dimension;
  ds.n_hat = h.n_hat;
  ds.run_seed = h.run_seed;
  ds.digest = h.digest;
  ds.compact = h.compact;
  ds.complete = h.complete && h.written == h.n;
  ds.basis = MonomialBasis(h.dimension, h.degree);
  const std::size_t dim = h.dimension;
  const std::size_t q = ds.basis.size();
  const std::size_t rec = h.record_reals();
  const std::uint64_t count = h.written;
  ds.samples.resize(count * dim);
  if (h.compact) {
    ds.mean_features.resize(count * q);
  } else {
    ds.successors.resize(count * h.n_hat * dim);
  }
  std::vector<unsigned char> buf(rec * 8);
  std::vector<double> vals(rec);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw DatasetError("dataset: truncated record " + std::to_string(i));
    }
    for (std::size_t t = 0; t < rec; ++t) {
      vals[t] = std::bit_cast<double>(detail::get_u64(buf.data() + 8 * t));
    }
    std::copy_n(vals.begin(), dim, ds.samples.begin() + static_cast<std::ptrdiff_t>(i * dim));
    if (h.compact) {
      std::copy_n(vals.begin() + static_cast<std::ptrdiff_t>(dim), q,
                  ds.mean_features.begin() + static_cast<std::ptrdiff_t>(i * q));
    } else {
      std::copy_n(vals.begin() + static_cast<std::ptrdiff_t>(dim), h.n_hat * dim,
                  ds.successors.begin() + static_cast<std::ptrdiff_t>(i * h.n_hat * dim));
    }
  }
  return ds;
}

}  // namespace scbc
