#pragma once

// EVT1 binary event container, little-endian:
//   magic "EVT1", u16 width, u16 height, u64 n_events,
//   then n_events records of (u16 x, u16 y, u32 t_us, i8 polarity, u8 pad).
// Timestamps are non-decreasing; polarity is +1 or -1.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowspike/encoding.hpp"

namespace flowspike {

struct EventFileHeader {
  int width = 0;
  int height = 0;
  std::uint64_t n_events = 0;
};

constexpr int kEventRecordBytes = 10;
constexpr int kEventHeaderBytes = 16;

// Streaming reader; validates every record and reports the byte offset of
// the first violation.
class EventFileReader {
 public:
  explicit EventFileReader(std::istream& is);

  const EventFileHeader& header() const { return hdr_; }
  // Next event, or nullopt after n_events records.
  std::optional<Event> next();
  std::int64_t offset() const { return off_; }

 private:
  std::istream& is_;
  EventFileHeader hdr_;
  std::uint64_t read_ = 0;
  std::int64_t off_ = 0;
  std::int64_t prev_t_ = -1;
};

// Decode one 10-byte record (no header context, bounds not checked).
Event decode_event_record(const unsigned char* rec);

std::vector<Event> read_events(std::istream& is, int& width, int& height);
std::vector<Event> read_events(const std::string& path, int& width, int& height);

void write_events(std::ostream& os, const std::vector<Event>& events, int width, int height);
void write_events(const std::string& path, const std::vector<Event>& events, int width,
                  int height);

}  // namespace flowspike
