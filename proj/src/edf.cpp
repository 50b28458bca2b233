#include "hbci/edf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <set>

namespace hbci {

namespace {

constexpr std::size_t kFixedHeader = 256;
constexpr std::size_t kPerSignalHeader = 256;

// Fixed-width ASCII field, left-aligned and space-padded.
void put_field(std::string& out, std::string_view value, std::size_t width) {
  std::string v(value.substr(0, width));
  for (char& c : v) {
    if (c < 32 || c > 126) c = ' ';
  }
  v.resize(width, ' ');
  out += v;
}

// Shortest locale-free decimal that fits the field width.
std::string format_number(double value, std::size_t width) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  std::string s(buf, res.ptr);
  if (s.size() <= width) return s;
  for (int precision = static_cast<int>(width); precision > 0; --precision) {
    res = std::to_chars(buf, buf + sizeof(buf), value,
                        std::chars_format::general, precision);
    s.assign(buf, res.ptr);
    if (s.size() <= width) return s;
  }
  throw Error(ErrorCode::Unrepresentable,
              "value " + std::to_string(value) + " does not fit EDF field");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(' ');
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(' ');
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(std::string_view field) {
  const std::string s = trim(field);
  if (s.empty()) return std::nullopt;
  double v{};
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<long> parse_long(std::string_view field) {
  const std::string s = trim(field);
  if (s.empty()) return std::nullopt;
  long v{};
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct RecordLayout {
  int samples_per_record;
  int data_records;
  std::string duration_field;
};

// Picks samples-per-record n dividing the sample count, preferring one-second
// records, such that the ASCII record duration parses back to exactly n/fs.
RecordLayout choose_layout(std::size_t total, double fs) {
  if (fs != std::floor(fs) || fs < 1.0 || fs > 1e6) {
    throw Error(ErrorCode::Unrepresentable,
                "EDF writer needs an integer sample rate, got " +
                    std::to_string(fs));
  }
  const auto rate = static_cast<std::size_t>(fs);
  auto try_n = [&](std::size_t n) -> std::optional<RecordLayout> {
    if (n == 0) return std::nullopt;
    std::string field;
    try {
      field = format_number(static_cast<double>(n) / fs, 8);
    } catch (const Error&) {
      return std::nullopt;
    }
    auto parsed = parse_double(field);
    if (!parsed || static_cast<double>(n) / *parsed != fs) return std::nullopt;
    return RecordLayout{static_cast<int>(n),
                        static_cast<int>(total / n), field};
  };
  if (total == 0) return {static_cast<int>(rate), 0, "1"};
  if (total % rate == 0) {
    if (auto l = try_n(rate)) return *l;
  }
  for (std::size_t n = std::min(rate, total); n >= 1; --n) {
    if (total % n != 0) continue;
    if (auto l = try_n(n)) return *l;
  }
  if (auto l = try_n(total)) return *l;
  throw Error(ErrorCode::Unrepresentable,
              "no EDF record layout represents this sample count exactly");
}

std::int16_t to_digital(double physical, const EdfSignalHeader& s,
                        const std::string& label, std::size_t index) {
  const double scaled = (physical - s.physical_min) *
                            (s.digital_max - s.digital_min) /
                            (s.physical_max - s.physical_min) +
                        s.digital_min;
  const double d = std::round(scaled);
  if (!(d >= s.digital_min && d <= s.digital_max)) {
    throw Error(ErrorCode::Unrepresentable,
                "channel " + label + " sample " + std::to_string(index) +
                    " value " + std::to_string(physical) +
                    " outside physical range");
  }
  return static_cast<std::int16_t>(d);
}

double to_physical(int digital, const EdfSignalHeader& s) {
  // Multiply before dividing so the digital extremes map exactly to the
  // physical extremes.
  return s.physical_min + (static_cast<double>(digital) - s.digital_min) *
                              (s.physical_max - s.physical_min) /
                              (s.digital_max - s.digital_min);
}

}  // namespace

std::vector<std::uint8_t> serialize_edf(const EegRecord& record,
                                        const EdfWriteOptions& options) {
  if (auto problem = record.check(); !problem.empty()) {
    throw Error(ErrorCode::InvalidArgument, "invalid record: " + problem);
  }
  const std::size_t total = record.sample_count();
  const double fs = record.sample_rate;
  const RecordLayout layout = choose_layout(total, fs);

  std::vector<EdfSignalHeader> signals;
  for (const auto& ch : record.channels) {
    EdfSignalHeader s;
    s.label = ch.label;
    s.transducer = "AgAgCl electrode";
    s.physical_unit = ch.physical_unit;
    s.physical_min = *parse_double(format_number(options.physical_min, 8));
    s.physical_max = *parse_double(format_number(options.physical_max, 8));
    s.samples_per_record = layout.samples_per_record;
    signals.push_back(s);
  }
  EdfSignalHeader marker;
  marker.label = kMarkerLabel;
  marker.transducer = "event marker";
  marker.physical_min = 0.0;
  marker.physical_max = std::floor(options.marker_physical_max);
  marker.digital_min = 0;
  marker.digital_max = static_cast<int>(marker.physical_max);
  marker.samples_per_record = layout.samples_per_record;
  if (marker.digital_max < 1 || marker.digital_max > 32767) {
    throw Error(ErrorCode::Unrepresentable,
                "marker physical maximum must lie in [1, 32767]");
  }
  if (options.marker_channel) {
    signals.push_back(marker);
  } else if (!record.markers.empty()) {
    throw Error(ErrorCode::InvalidArgument, "record has markers but the MARKER channel is disabled");
  }

  for (const auto& s : signals) {
    if (!(s.physical_min < s.physical_max)) {
      throw Error(ErrorCode::EdfDegenerateScaling,
                  "physical range of " + s.label + " is empty");
    }
  }

  // Marker channel: code at the nearest sample, zero elsewhere.
  std::vector<std::int16_t> marker_samples(total, 0);
  for (const auto& m : record.markers) {
    if (total == 0) {
      throw Error(ErrorCode::Unrepresentable, "marker in an empty record");
    }
    if (m.code < 1 || m.code > marker.digital_max) {
      throw Error(ErrorCode::Unrepresentable,
                  "marker code " + std::to_string(m.code) +
                      " outside MARKER channel range");
    }
    auto idx = static_cast<std::size_t>(std::llround(m.timestamp * fs));
    idx = std::min(idx, total - 1);
    if (marker_samples[idx] != 0) {
      throw Error(ErrorCode::Unrepresentable,
                  "two markers map to MARKER sample " + std::to_string(idx));
    }
    marker_samples[idx] = static_cast<std::int16_t>(m.code);
  }

  const std::size_t ns = signals.size();
  std::string header;
  header.reserve(kFixedHeader + kPerSignalHeader * ns);
  put_field(header, "0", 8);
  put_field(header, options.patient_id, 80);
  put_field(header, options.recording_id, 80);
  put_field(header, record.start_date, 8);
  put_field(header, record.start_time, 8);
  put_field(header, std::to_string(kFixedHeader + kPerSignalHeader * ns), 8);
  put_field(header, "", 44);
  put_field(header, std::to_string(layout.data_records), 8);
  put_field(header, layout.duration_field, 8);
  put_field(header, std::to_string(ns), 4);
  for (const auto& s : signals) put_field(header, s.label, 16);
  for (const auto& s : signals) put_field(header, s.transducer, 80);
  for (const auto& s : signals) put_field(header, s.physical_unit, 8);
  for (const auto& s : signals) put_field(header, format_number(s.physical_min, 8), 8);
  for (const auto& s : signals) put_field(header, format_number(s.physical_max, 8), 8);
  for (const auto& s : signals) put_field(header, std::to_string(s.digital_min), 8);
  for (const auto& s : signals) put_field(header, std::to_string(s.digital_max), 8);
  for (const auto& s : signals) put_field(header, s.prefiltering, 80);
  for (const auto& s : signals) put_field(header, std::to_string(s.samples_per_record), 8);
  for (std::size_t i = 0; i < ns; ++i) put_field(header, "", 32);

  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + total * ns * 2);
  auto put_sample = [&out](std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  };
  const auto spr = static_cast<std::size_t>(layout.samples_per_record);
  for (int r = 0; r < layout.data_records; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * spr;
    for (std::size_t c = 0; c < record.channels.size(); ++c) {
      const auto& ch = record.channels[c];
      for (std::size_t i = base; i < base + spr; ++i) {
        put_sample(to_digital(ch.samples[i], signals[c], ch.label, i));
      }
    }
    if (!options.marker_channel) continue;
    for (std::size_t i = base; i < base + spr; ++i) put_sample(marker_samples[i]);
  }
  return out;
}

void write_edf(const EegRecord& record, const std::filesystem::path& path,
               const EdfWriteOptions& options) {
  const auto bytes = serialize_edf(record, options);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

EdfHeader parse_edf_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeader) {
    throw Error(ErrorCode::EdfTruncated, "file shorter than the EDF header");
  }
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()),
                              bytes.size());
  std::size_t pos = 0;
  auto field = [&](std::size_t width) {
    auto f = text.substr(pos, width);
    pos += width;
    return f;
  };
  auto need_long = [](std::string_view f, const char* what) {
    auto v = parse_long(f);
    if (!v) {
      throw Error(ErrorCode::EdfMalformedHeader,
                  std::string("malformed header field: ") + what);
    }
    return *v;
  };
  auto need_double = [](std::string_view f, const char* what) {
    auto v = parse_double(f);
    if (!v) {
      throw Error(ErrorCode::EdfMalformedHeader,
                  std::string("malformed header field: ") + what);
    }
    return *v;
  };

  EdfHeader h;
  h.version = trim(field(8));
  if (h.version != "0") {
    throw Error(ErrorCode::EdfMalformedHeader, "unsupported EDF version");
  }
  h.patient_id = trim(field(80));
  h.recording_id = trim(field(80));
  h.start_date = trim(field(8));
  h.start_time = trim(field(8));
  h.header_bytes = static_cast<int>(need_long(field(8), "header bytes"));
  field(44);
  h.data_records = static_cast<int>(need_long(field(8), "data records"));
  h.record_duration = need_double(field(8), "record duration");
  const long ns = need_long(field(4), "signal count");
  if (ns < 1 || ns > 4096) {
    throw Error(ErrorCode::EdfMalformedHeader, "implausible signal count");
  }
  if (h.header_bytes !=
      static_cast<int>(kFixedHeader + kPerSignalHeader * static_cast<std::size_t>(ns))) {
    throw Error(ErrorCode::EdfMalformedHeader,
                "header byte count disagrees with signal count");
  }
  if (bytes.size() < static_cast<std::size_t>(h.header_bytes)) {
    throw Error(ErrorCode::EdfTruncated, "file shorter than its signal headers");
  }
  if (!(h.record_duration > 0.0)) {
    throw Error(ErrorCode::EdfMalformedHeader, "record duration must be > 0");
  }
  if (h.data_records < -1) {
    throw Error(ErrorCode::EdfMalformedHeader, "negative data record count");
  }

  h.signals.resize(static_cast<std::size_t>(ns));
  for (auto& s : h.signals) s.label = trim(field(16));
  for (auto& s : h.signals) s.transducer = trim(field(80));
  for (auto& s : h.signals) s.physical_unit = trim(field(8));
  for (auto& s : h.signals) s.physical_min = need_double(field(8), "physical min");
  for (auto& s : h.signals) s.physical_max = need_double(field(8), "physical max");
  for (auto& s : h.signals) s.digital_min = static_cast<int>(need_long(field(8), "digital min"));
  for (auto& s : h.signals) s.digital_max = static_cast<int>(need_long(field(8), "digital max"));
  for (auto& s : h.signals) s.prefiltering = trim(field(80));
  for (auto& s : h.signals) {
    s.samples_per_record = static_cast<int>(need_long(field(8), "samples per record"));
    if (s.samples_per_record < 1) {
      throw Error(ErrorCode::EdfMalformedHeader, "samples per record must be >= 1");
    }
  }
  for (const auto& s : h.signals) {
    if (!(s.physical_min < s.physical_max) || !(s.digital_min < s.digital_max)) {
      throw Error(ErrorCode::EdfDegenerateScaling,
                  "degenerate scaling for signal " + s.label);
    }
    if (s.digital_min < -32768 || s.digital_max > 32767) {
      throw Error(ErrorCode::EdfMalformedHeader,
                  "digital range of " + s.label + " exceeds 16 bits");
    }
  }
  return h;
}

EdfContents parse_edf(std::span<const std::uint8_t> bytes) {
  EdfContents out;
  out.header = parse_edf_header(bytes);
  const auto& h = out.header;

  std::size_t record_bytes = 0;
  for (const auto& s : h.signals) record_bytes += 2 * static_cast<std::size_t>(s.samples_per_record);
  const std::size_t payload = bytes.size() - static_cast<std::size_t>(h.header_bytes);
  std::size_t records;
  if (h.data_records == -1) {
    if (payload % record_bytes != 0) {
      throw Error(ErrorCode::EdfInconsistentRecords,
                  "payload is not a whole number of data records");
    }
    records = payload / record_bytes;
  } else {
    records = static_cast<std::size_t>(h.data_records);
    if (payload < records * record_bytes) {
      throw Error(ErrorCode::EdfTruncated,
                  "file shorter than its header claims");
    }
    if (payload != records * record_bytes) {
      throw Error(ErrorCode::EdfInconsistentRecords,
                  "trailing bytes after the last data record");
    }
  }

  const int spr = h.signals.front().samples_per_record;
  for (const auto& s : h.signals) {
    if (s.samples_per_record != spr) {
      throw Error(ErrorCode::EdfInconsistentRecords,
                  "signals with differing sample rates are not supported");
    }
  }

  EegRecord& rec = out.record;
  rec.sample_rate = spr / h.record_duration;
  rec.start_date = h.start_date;
  rec.start_time = h.start_time;
  std::optional<std::size_t> marker_index;
  for (std::size_t i = 0; i < h.signals.size(); ++i) {
    if (h.signals[i].label == kMarkerLabel && !marker_index) {
      marker_index = i;
      continue;
    }
    rec.channels.push_back(Channel{h.signals[i].label, h.signals[i].physical_unit, {}});
    rec.channels.back().samples.reserve(records * static_cast<std::size_t>(spr));
  }
  out.has_marker_channel = marker_index.has_value();

  const std::uint8_t* p = bytes.data() + h.header_bytes;
  auto read_sample = [&p]() {
    const auto u = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    p += 2;
    return static_cast<std::int16_t>(u);
  };
  std::size_t sample_index = 0;
  for (std::size_t r = 0; r < records; ++r) {
    std::size_t channel = 0;
    for (std::size_t i = 0; i < h.signals.size(); ++i) {
      const auto& s = h.signals[i];
      const bool is_marker = marker_index && *marker_index == i;
      for (int k = 0; k < spr; ++k) {
        const std::int16_t d = read_sample();
        if (is_marker) {
          if (d != 0) {
            const double code = std::round(to_physical(d, s));
            rec.markers.push_back(
                {static_cast<int>(code),
                 static_cast<double>(sample_index + static_cast<std::size_t>(k)) /
                     rec.sample_rate});
          }
        } else {
          rec.channels[channel].samples.push_back(to_physical(d, s));
        }
      }
      if (!is_marker) ++channel;
    }
    sample_index += static_cast<std::size_t>(spr);
  }
  return out;
}

EdfContents read_edf_contents(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_edf(bytes);
}

EegRecord read_edf(const std::filesystem::path& path) {
  return read_edf_contents(path).record;
}

}  // namespace hbci
