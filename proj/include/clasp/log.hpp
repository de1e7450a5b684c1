#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "clasp/error.hpp"

namespace clasp {

// ---------------------------------------------------------------------------
// Session log: multi-rate timestamped streams with a self-describing file
// format. Text header (version, session epoch, stream table) followed by
// length-prefixed little-endian binary records:
//
//   CLASPLOG 1
//   session <free-form id>
//   epoch_ns <u64>
//   stream <index> <arity> <nominal_rate_hz> <clock_offset_ns> <name>
//   ...
//   end
//   [u32 record_len][u16 stream_index][u64 t_ns][f64 payload x arity] ...
//
// record_len covers everything after the length field. A truncated or
// corrupted tail stops the reader at the last complete record.
// ---------------------------------------------------------------------------

inline constexpr const char* kLogMagic = "CLASPLOG";
inline constexpr int kLogVersion = 1;

struct StreamSpec {
  std::string name;
  double nominal_rate = 0.0;     // Hz
  int arity = 0;                 // payload element count
  int64_t clock_offset_ns = 0;   // added to timestamps at read/alignment time
};

struct TimedSample {
  uint64_t t_ns = 0;             // nanoseconds since session epoch
  Eigen::VectorXd payload;
};

class SessionLog {
 public:
  SessionLog() = default;
  SessionLog(std::string session_id, uint64_t epoch_ns)
      : session_id_(std::move(session_id)), epoch_ns_(epoch_ns) {}

  int add_stream(const StreamSpec& spec) {
    if (spec.name.empty()) throw ConfigError("stream name must be non-empty");
    if (!(spec.nominal_rate > 0.0))
      throw ConfigError("stream rate must be > 0");
    if (spec.arity <= 0) throw ConfigError("stream arity must be > 0");
    if (find_stream(spec.name).has_value())
      throw ConfigError("duplicate stream name '" + spec.name + "'");
    specs_.push_back(spec);
    samples_.emplace_back();
    return static_cast<int>(specs_.size()) - 1;
  }

  std::optional<int> find_stream(const std::string& name) const {
    for (size_t i = 0; i < specs_.size(); ++i)
      if (specs_[i].name == name) return static_cast<int>(i);
    return std::nullopt;
  }

  int stream_index(const std::string& name) const {
    auto idx = find_stream(name);
    if (!idx) throw ConfigError("unknown stream '" + name + "'");
    return *idx;
  }

  void append(int stream, uint64_t t_ns, const Eigen::VectorXd& payload) {
    if (stream < 0 || stream >= static_cast<int>(specs_.size()))
      throw ConfigError("unknown stream index");
    if (payload.size() != specs_[stream].arity)
      throw ConfigError("payload arity mismatch on stream '" +
                        specs_[stream].name + "'");
    auto& samples = samples_[stream];
    if (!samples.empty() && t_ns <= samples.back().t_ns)
      throw ConfigError("non-monotonic timestamp on stream '" +
                        specs_[stream].name + "'");
    samples.push_back(TimedSample{t_ns, payload});
  }

  void append(const std::string& stream, uint64_t t_ns,
              const Eigen::VectorXd& payload) {
    append(stream_index(stream), t_ns, payload);
  }

  const std::string& session_id() const { return session_id_; }
  uint64_t epoch_ns() const { return epoch_ns_; }
  const std::vector<StreamSpec>& streams() const { return specs_; }
  const std::vector<TimedSample>& samples(int stream) const {
    return samples_[stream];
  }
  const std::vector<TimedSample>& samples(const std::string& name) const {
    return samples_[stream_index(name)];
  }
  size_t total_samples() const {
    size_t n = 0;
    for (const auto& s : samples_) n += s.size();
    return n;
  }

  void set_clock_offset(const std::string& name, int64_t offset_ns) {
    specs_[stream_index(name)].clock_offset_ns = offset_ns;
  }

 private:
  std::string session_id_ = "session";
  uint64_t epoch_ns_ = 0;
  std::vector<StreamSpec> specs_;
  std::vector<std::vector<TimedSample>> samples_;
};

// ---------------------------------------------------------------------------
// Little-endian primitives
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
inline void store_le(unsigned char* dst, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i)
    dst[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
}

template <typename T>
inline T load_le(const unsigned char* src) {
  static_assert(std::is_unsigned_v<T>);
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(src[i]) << (8 * i);
  return v;
}

inline void store_f64(unsigned char* dst, double value) {
  uint64_t bits;
  std::memcpy(&bits, &value, 8);
  store_le<uint64_t>(dst, bits);
}

inline double load_f64(const unsigned char* src) {
  const uint64_t bits = load_le<uint64_t>(src);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

struct ReadStats {
  bool truncated = false;       // file ended mid-record or with a bad record
  size_t records_read = 0;
  size_t bytes_consumed = 0;
};

inline void write_log(const SessionLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  std::ostringstream header;
  header << kLogMagic << " " << kLogVersion << "\n";
  header << "session " << log.session_id() << "\n";
  header << "epoch_ns " << log.epoch_ns() << "\n";
  const auto& specs = log.streams();
  for (size_t i = 0; i < specs.size(); ++i) {
    std::ostringstream rate;
    rate.precision(17);
    rate << specs[i].nominal_rate;
    header << "stream " << i << " " << specs[i].arity << " " << rate.str()
           << " " << specs[i].clock_offset_ns << " " << specs[i].name << "\n";
  }
  header << "end\n";
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));

  std::vector<unsigned char> buf;
  for (size_t i = 0; i < specs.size(); ++i) {
    const uint32_t len = 2 + 8 + 8 * static_cast<uint32_t>(specs[i].arity);
    buf.resize(4 + len);
    for (const auto& sample : log.samples(static_cast<int>(i))) {
      detail::store_le<uint32_t>(buf.data(), len);
      detail::store_le<uint16_t>(buf.data() + 4, static_cast<uint16_t>(i));
      detail::store_le<uint64_t>(buf.data() + 6, sample.t_ns);
      for (int j = 0; j < specs[i].arity; ++j)
        detail::store_f64(buf.data() + 14 + 8 * j, sample.payload(j));
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size()));
    }
  }
  if (!out) throw IoError("write failed on '" + path + "'");
}

inline SessionLog read_log(const std::string& path,
                           ReadStats* stats = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw IoError("empty log file");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = -1;
    ls >> magic >> version;
    if (magic != kLogMagic) throw IoError("not a session log: bad magic");
    if (version != kLogVersion)
      throw IoError("unsupported log version " + std::to_string(version));
  }

  SessionLog log;
  std::string session_id = "session";
  uint64_t epoch_ns = 0;
  std::vector<StreamSpec> specs;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "session") {
      session_id = line.size() > 8 ? line.substr(8) : "";
    } else if (key == "epoch_ns") {
      ls >> epoch_ns;
    } else if (key == "stream") {
      size_t index = 0;
      StreamSpec spec;
      ls >> index >> spec.arity >> spec.nominal_rate >> spec.clock_offset_ns;
      ls >> std::ws;
      std::getline(ls, spec.name);
      if (!ls && spec.name.empty())
        throw IoError("malformed stream line: " + line);
      if (index != specs.size())
        throw IoError("stream table out of order");
      specs.push_back(spec);
    } else if (!key.empty()) {
      throw IoError("unknown header line: " + line);
    }
  }
  log = SessionLog(session_id, epoch_ns);
  for (const auto& s : specs) log.add_stream(s);

  ReadStats local;
  local.bytes_consumed = static_cast<size_t>(in.tellg());
  std::vector<unsigned char> buf;
  unsigned char lenbuf[4];
  while (in.read(reinterpret_cast<char*>(lenbuf), 4)) {
    const uint32_t len = detail::load_le<uint32_t>(lenbuf);
    if (len < 10 || len > 4u + 8u * (1u << 20)) {  // sanity: <= ~8 MB payload
      local.truncated = true;
      break;
    }
    buf.resize(len);
    if (!in.read(reinterpret_cast<char*>(buf.data()), len)) {
      local.truncated = true;
      break;
    }
    const uint16_t stream = detail::load_le<uint16_t>(buf.data());
    if (stream >= specs.size() ||
        len != 2u + 8u + 8u * static_cast<uint32_t>(specs[stream].arity)) {
      local.truncated = true;
      break;
    }
    const uint64_t t_ns = detail::load_le<uint64_t>(buf.data() + 2);
    Eigen::VectorXd payload(specs[stream].arity);
    for (int j = 0; j < specs[stream].arity; ++j)
      payload(j) = detail::load_f64(buf.data() + 10 + 8 * j);
    try {
      log.append(static_cast<int>(stream), t_ns, payload);
    } catch (const ConfigError&) {  // corrupt record (e.g. bad timestamp)
      local.truncated = true;
      break;
    }
    ++local.records_read;
    local.bytes_consumed += 4u + len;
  }
  if (in.gcount() > 0 && in.gcount() < 4) local.truncated = true;
  if (stats) *stats = local;
  return log;
}

// ---------------------------------------------------------------------------
// Alignment / resampling
// ---------------------------------------------------------------------------

enum class ResampleMethod { zero_order_hold, linear };
enum class AlignSpan { overlap, full };

/// Uniform-timeline view of one or more streams. Times are seconds since the
/// session epoch (clock offsets already applied). `present[row][stream]` is
/// false where a stream has no defined value (possible with AlignSpan::full).
struct AlignedTable {
  double start_time = 0.0;  // s
  double rate = 0.0;        // Hz
  std::vector<StreamSpec> streams;
  std::vector<int> column_offset;  // per stream, into `values` columns
  Eigen::MatrixXd values;          // rows x total arity
  std::vector<std::vector<uint8_t>> present;

  int rows() const { return static_cast<int>(values.rows()); }
  double time_at(int row) const { return start_time + row / rate; }
};

namespace detail {

/// Sample timestamps snap to the grid within 1 ns to keep identity resampling
/// exact despite ns-integer vs double rounding.
inline constexpr double kTimeSnapTol = 1e-9;  // s

struct InterpStream {
  std::vector<double> t;  // offset-adjusted, seconds
  const std::vector<TimedSample>* samples;
};

inline double interp_value(const InterpStream& s, double t, int col,
                           ResampleMethod method, bool* ok) {
  const auto& ts = s.t;
  *ok = true;
  auto it = std::upper_bound(ts.begin(), ts.end(), t + kTimeSnapTol);
  if (it == ts.begin()) {
    *ok = false;
    return 0.0;
  }
  const size_t hi = static_cast<size_t>(it - ts.begin());
  const size_t lo = hi - 1;
  if (std::abs(ts[lo] - t) <= kTimeSnapTol)
    return (*s.samples)[lo].payload(col);
  if (hi >= ts.size()) {  // past the last sample: outside the stream's span
    *ok = false;
    return 0.0;
  }
  if (method == ResampleMethod::zero_order_hold)
    return (*s.samples)[lo].payload(col);
  const double a = (t - ts[lo]) / (ts[hi] - ts[lo]);
  const double v_lo = (*s.samples)[lo].payload(col);
  return v_lo + a * ((*s.samples)[hi].payload(col) - v_lo);
}

}  // namespace detail

inline AlignedTable align_resample(const SessionLog& log,
                                   const std::vector<std::string>& names,
                                   double target_rate, ResampleMethod method,
                                   AlignSpan span = AlignSpan::overlap) {
  if (names.empty()) throw ConfigError("align_resample: no streams requested");
  if (!(target_rate > 0.0))
    throw ConfigError("align_resample: target rate must be > 0");

  AlignedTable table;
  table.rate = target_rate;
  std::vector<detail::InterpStream> interp;
  double overlap_start = -std::numeric_limits<double>::infinity();
  double overlap_end = std::numeric_limits<double>::infinity();
  double full_start = std::numeric_limits<double>::infinity();
  double full_end = -std::numeric_limits<double>::infinity();
  int total_arity = 0;

  for (const auto& name : names) {
    const int idx = log.stream_index(name);
    const auto& spec = log.streams()[idx];
    const auto& samples = log.samples(idx);
    if (samples.empty())
      throw ConfigError("align_resample: stream '" + name + "' is empty");
    detail::InterpStream s;
    s.samples = &samples;
    s.t.reserve(samples.size());
    for (const auto& sample : samples)
      s.t.push_back((static_cast<double>(sample.t_ns) +
                     static_cast<double>(spec.clock_offset_ns)) *
                    1e-9);
    overlap_start = std::max(overlap_start, s.t.front());
    overlap_end = std::min(overlap_end, s.t.back());
    full_start = std::min(full_start, s.t.front());
    full_end = std::max(full_end, s.t.back());
    interp.push_back(std::move(s));
    table.streams.push_back(spec);
    table.column_offset.push_back(total_arity);
    total_arity += spec.arity;
  }

  const double start =
      span == AlignSpan::overlap ? overlap_start : full_start;
  const double end = span == AlignSpan::overlap ? overlap_end : full_end;
  if (!(end >= start - detail::kTimeSnapTol))
    throw Error("align_resample: streams have no temporal overlap");

  const int rows =
      static_cast<int>(std::floor((end - start) * target_rate +
                                  detail::kTimeSnapTol)) +
      1;
  table.start_time = start;
  table.values.resize(rows, total_arity);
  table.present.assign(rows, std::vector<uint8_t>(names.size(), 1));

  for (int row = 0; row < rows; ++row) {
    const double t = start + row / target_rate;
    for (size_t s = 0; s < interp.size(); ++s) {
      bool ok = true;
      for (int c = 0; c < table.streams[s].arity; ++c) {
        const double v = detail::interp_value(interp[s], t, c, method, &ok);
        table.values(row, table.column_offset[s] + c) = ok ? v : 0.0;
        if (!ok) break;
      }
      if (!ok) table.present[row][s] = 0;
    }
  }
  return table;
}

/// Writes an aligned table as CSV: a time column then name.i value columns.
/// Absent cells are left empty.
inline void write_csv(const AlignedTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "t";
  for (size_t s = 0; s < table.streams.size(); ++s)
    for (int c = 0; c < table.streams[s].arity; ++c)
      out << "," << table.streams[s].name << "." << c;
  out << "\n";
  out.precision(17);
  for (int row = 0; row < table.rows(); ++row) {
    out << table.time_at(row);
    for (size_t s = 0; s < table.streams.size(); ++s) {
      for (int c = 0; c < table.streams[s].arity; ++c) {
        out << ",";
        if (table.present[row][s])
          out << table.values(row, table.column_offset[s] + c);
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed on '" + path + "'");
}

/// Resamples the requested streams onto a shared uniform timeline and packs
/// the result into a new session log (used by the CLI's `log resample`).
inline SessionLog resample_to_log(const SessionLog& log,
                                  const std::vector<std::string>& names,
                                  double target_rate, ResampleMethod method) {
  const AlignedTable table = align_resample(log, names, target_rate, method);
  SessionLog out(log.session_id() + "/resampled", log.epoch_ns());
  for (const auto& spec : table.streams) {
    StreamSpec s = spec;
    s.nominal_rate = target_rate;
    s.clock_offset_ns = 0;
    out.add_stream(s);
  }
  for (int row = 0; row < table.rows(); ++row) {
    const uint64_t t_ns = static_cast<uint64_t>(
        std::llround(table.time_at(row) * 1e9));
    for (size_t s = 0; s < table.streams.size(); ++s) {
      if (!table.present[row][s]) continue;
      out.append(static_cast<int>(s), t_ns,
                 table.values.row(row).segment(table.column_offset[s],
                                               table.streams[s].arity));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hashing (trace determinism checks)
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const unsigned char* data, size_t n,
                        uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for hashing");
  uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<unsigned char> buf(1 << 16);
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(buf.data(), static_cast<size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace clasp
