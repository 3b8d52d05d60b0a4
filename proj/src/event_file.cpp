#include "flowspike/event_file.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace flowspike {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'T', '1'};

std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint64_t rd_u64(const unsigned char* p) {
  return static_cast<std::uint64_t>(rd_u32(p)) | (static_cast<std::uint64_t>(rd_u32(p + 4)) << 32);
}
void wr_u16(unsigned char* p, std::uint16_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
}
void wr_u32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}
void wr_u64(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

}  // namespace

Event decode_event_record(const unsigned char* rec) {
  Event e;
  e.x = rd_u16(rec);
  e.y = rd_u16(rec + 2);
  e.t = rd_u32(rec + 4);
  e.p = static_cast<std::int8_t>(rec[8]);
  return e;
}

EventFileReader::EventFileReader(std::istream& is) : is_(is) {
  unsigned char hdr[kEventHeaderBytes];
  is_.read(reinterpret_cast<char*>(hdr), kEventHeaderBytes);
  if (is_.gcount() != kEventHeaderBytes)
    throw io_error("truncated event file header", is_.gcount());
  if (std::memcmp(hdr, kMagic, 4) != 0) throw io_error("bad event file magic", 0);
  hdr_.width = rd_u16(hdr + 4);
  hdr_.height = rd_u16(hdr + 6);
  hdr_.n_events = rd_u64(hdr + 8);
  if (hdr_.width == 0 || hdr_.height == 0)
    throw io_error("event file declares zero sensor extent", 4);
  off_ = kEventHeaderBytes;
}

std::optional<Event> EventFileReader::next() {
  if (read_ >= hdr_.n_events) return std::nullopt;
  unsigned char rec[kEventRecordBytes];
  is_.read(reinterpret_cast<char*>(rec), kEventRecordBytes);
  if (is_.gcount() != kEventRecordBytes)
    throw io_error("truncated event file: record " + std::to_string(read_) + " of " +
                       std::to_string(hdr_.n_events) + " incomplete",
                   off_);
  Event e = decode_event_record(rec);
  if (e.x >= hdr_.width)
    throw io_error("event x=" + std::to_string(e.x) + " >= width " + std::to_string(hdr_.width),
                   off_);
  if (e.y >= hdr_.height)
    throw io_error("event y=" + std::to_string(e.y) + " >= height " + std::to_string(hdr_.height),
                   off_);
  if (e.p != 1 && e.p != -1)
    throw io_error("event polarity " + std::to_string(e.p) + " not in {+1,-1}", off_);
  if (e.t < prev_t_) throw io_error("timestamp regression " + std::to_string(prev_t_) + " -> " +
                                        std::to_string(e.t),
                                    off_);
  prev_t_ = e.t;
  off_ += kEventRecordBytes;
  ++read_;
  return e;
}

std::vector<Event> read_events(std::istream& is, int& width, int& height) {
  EventFileReader r(is);
  width = r.header().width;
  height = r.header().height;
  std::vector<Event> out;
  out.reserve(static_cast<std::size_t>(
      std::min<std::uint64_t>(r.header().n_events, 1ull << 24)));
  while (auto e = r.next()) out.push_back(*e);
  char extra;
  if (is.read(&extra, 1); is.gcount() == 1)
    throw io_error("trailing data after declared events", r.offset());
  return out;
}

std::vector<Event> read_events(const std::string& path, int& width, int& height) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for reading");
  return read_events(f, width, height);
}

void write_events(std::ostream& os, const std::vector<Event>& events, int width, int height) {
  if (width <= 0 || width > 65535 || height <= 0 || height > 65535)
    throw validation_error("write_events: sensor extents must be in 1..65535");
  unsigned char hdr[kEventHeaderBytes];
  std::memcpy(hdr, kMagic, 4);
  wr_u16(hdr + 4, static_cast<std::uint16_t>(width));
  wr_u16(hdr + 6, static_cast<std::uint16_t>(height));
  wr_u64(hdr + 8, events.size());
  os.write(reinterpret_cast<const char*>(hdr), kEventHeaderBytes);

  std::int64_t prev_t = -1;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height)
      throw validation_error("write_events: event " + std::to_string(i) + " at (" +
                             std::to_string(e.x) + "," + std::to_string(e.y) + ") out of range");
    if (e.p != 1 && e.p != -1)
      throw validation_error("write_events: event " + std::to_string(i) + " polarity " +
                             std::to_string(e.p));
    if (e.t < 0 || e.t > 0xffffffffll)
      throw validation_error("write_events: event " + std::to_string(i) + " timestamp " +
                             std::to_string(e.t) + " does not fit u32 microseconds");
    if (e.t < prev_t)
      throw validation_error("write_events: unordered events at index " + std::to_string(i));
    prev_t = e.t;
    unsigned char rec[kEventRecordBytes];
    wr_u16(rec, static_cast<std::uint16_t>(e.x));
    wr_u16(rec + 2, static_cast<std::uint16_t>(e.y));
    wr_u32(rec + 4, static_cast<std::uint32_t>(e.t));
    rec[8] = static_cast<unsigned char>(static_cast<std::int8_t>(e.p));
    rec[9] = 0;
    os.write(reinterpret_cast<const char*>(rec), kEventRecordBytes);
  }
  if (!os) throw io_error("event file write failed");
}

void write_events(const std::string& path, const std::vector<Event>& events, int width,
                  int height) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  write_events(f, events, width, height);
  f.flush();
  if (!f) throw io_error("event file write failed for '" + path + "'");
}

}  // namespace flowspike
