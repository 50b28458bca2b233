#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hbci/types.hpp"

namespace hbci {

inline constexpr const char* kMarkerLabel = "MARKER";

struct EdfSignalHeader {
  std::string label;
  std::string transducer;
  std::string physical_unit;
  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = -32768;
  int digital_max = 32767;
  std::string prefiltering;
  int samples_per_record = 0;
};

struct EdfHeader {
  std::string version = "0";
  std::string patient_id;
  std::string recording_id;
  std::string start_date;
  std::string start_time;
  int header_bytes = 0;
  int data_records = 0;
  double record_duration = 0.0;
  std::vector<EdfSignalHeader> signals;
};

struct EdfWriteOptions {
  double physical_min = -200.0;
  double physical_max = 200.0;
  double marker_physical_max = 500.0;
  std::string patient_id = "X X X X";
  std::string recording_id = "Startdate X X X hbci-synthetic";
  // false writes the EEG channels only; the record must then carry no markers.
  bool marker_channel = true;
};

struct EdfContents {
  EdfHeader header;
  EegRecord record;
  bool has_marker_channel = false;
};

std::vector<std::uint8_t> serialize_edf(const EegRecord& record,
                                        const EdfWriteOptions& options = {});
void write_edf(const EegRecord& record, const std::filesystem::path& path,
               const EdfWriteOptions& options = {});

EdfHeader parse_edf_header(std::span<const std::uint8_t> bytes);
EdfContents parse_edf(std::span<const std::uint8_t> bytes);
EdfContents read_edf_contents(const std::filesystem::path& path);
EegRecord read_edf(const std::filesystem::path& path);

}  // namespace hbci
