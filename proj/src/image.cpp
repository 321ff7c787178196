#include "daosim/image.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "daosim/crc32c.hpp"

namespace daosim::image {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

  std::size_t remaining() const { return n_ - pos_; }

  const std::uint8_t* take(std::size_t k, const char* what) {
    if (remaining() < k)
      fail(Errc::BadImage, std::string("image truncated reading ") + what);
    const std::uint8_t* at = p_ + pos_;
    pos_ += k;
    return at;
  }

  std::uint16_t u16(const char* what) {
    const std::uint8_t* b = take(2, what);
    return static_cast<std::uint16_t>(b[0] | (std::uint16_t{b[1]} << 8));
  }

  std::uint32_t u32(const char* what) {
    const std::uint8_t* b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
    return v;
  }

  std::uint64_t u64(const char* what) {
    const std::uint8_t* b = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
  }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

Bytes encode(const Image& img) {
  Bytes body;
  put_u16(body, kFormatVersion);
  body.insert(body.end(), img.container_id.bytes.begin(),
              img.container_id.bytes.end());
  put_u64(body, img.committed_version);
  put_u64(body, img.records.size());
  for (const kv::Record& r : img.records) {
    if (r.kind == kv::Record::Write && r.payload.size() != r.extent.length)
      fail(Errc::BadImage, "write record payload disagrees with extent");
    if (r.dkey.size() > kMaxKeyLen || r.akey.size() > kMaxKeyLen)
      fail(Errc::BadImage, "record key too long");
    put_u64(body, r.oid.hi);
    put_u64(body, r.oid.lo);
    put_u16(body, static_cast<std::uint16_t>(r.dkey.size()));
    body.insert(body.end(), r.dkey.begin(), r.dkey.end());
    put_u16(body, static_cast<std::uint16_t>(r.akey.size()));
    body.insert(body.end(), r.akey.begin(), r.akey.end());
    put_u64(body, r.extent.offset);
    put_u64(body, r.extent.length);
    put_u64(body, r.epoch);
    put_u32(body, r.crc);
    body.insert(body.end(), r.payload.begin(), r.payload.end());
    body.push_back(static_cast<std::uint8_t>(r.kind));
  }

  Bytes file;
  file.insert(file.end(), kMagic, kMagic + 4);
  file.insert(file.end(), body.begin(), body.end());
  put_u32(file, crc32c(body));
  return file;
}

Image parse(const Bytes& data) {
  if (data.size() < 4 + 2 + 16 + 8 + 8 + 4)
    fail(Errc::BadImage, "file too short to be a container image");
  if (std::memcmp(data.data(), kMagic, 4) != 0)
    fail(Errc::BadImage, "bad magic");

  const std::size_t body_len = data.size() - 4 - 4;
  std::uint32_t trailer = 0;
  for (int i = 0; i < 4; ++i)
    trailer |= std::uint32_t{data[data.size() - 4 + i]} << (8 * i);
  if (crc32c(data.data() + 4, body_len) != trailer)
    fail(Errc::BadImage, "trailer checksum mismatch");

  Reader in(data.data() + 4, body_len);
  Image img;
  const std::uint16_t version = in.u16("format version");
  if (version != kFormatVersion)
    fail(Errc::BadImage,
         "unsupported format version " + std::to_string(version));
  std::memcpy(img.container_id.bytes.data(), in.take(16, "container id"), 16);
  img.committed_version = in.u64("committed version");
  const std::uint64_t count = in.u64("record count");

  img.records.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    kv::Record r;
    r.oid.hi = in.u64("record oid");
    r.oid.lo = in.u64("record oid");
    const std::uint16_t dlen = in.u16("dkey length");
    if (dlen > kMaxKeyLen) fail(Errc::BadImage, "dkey longer than 256 bytes");
    const std::uint8_t* d = in.take(dlen, "dkey");
    r.dkey.assign(reinterpret_cast<const char*>(d), dlen);
    const std::uint16_t alen = in.u16("akey length");
    if (alen > kMaxKeyLen) fail(Errc::BadImage, "akey longer than 256 bytes");
    const std::uint8_t* a = in.take(alen, "akey");
    r.akey.assign(reinterpret_cast<const char*>(a), alen);
    r.extent.offset = in.u64("extent offset");
    r.extent.length = in.u64("extent length");
    r.epoch = in.u64("record epoch");
    r.crc = in.u32("record checksum");
    const std::uint8_t* p = in.take(static_cast<std::size_t>(r.extent.length),
                                    "record payload");
    r.payload.assign(p, p + r.extent.length);
    const std::uint8_t kind = *in.take(1, "record kind");
    if (kind > 1) fail(Errc::BadImage, "unknown record kind");
    r.kind = static_cast<kv::Record::Kind>(kind);

    if (r.kind == kv::Record::Write) {
      if (r.dkey.empty() || r.akey.empty())
        fail(Errc::BadImage, "write record with empty key");
      if (r.extent.length == 0)
        fail(Errc::BadImage, "write record with empty extent");
      if (r.extent.offset > ~std::uint64_t{0} - r.extent.length)
        fail(Errc::BadImage, "write record extent overflows");
      if (crc32c(r.payload) != r.crc)
        fail(Errc::ChecksumMismatch,
             "record " + std::to_string(i) + " payload failed CRC");
    } else {
      if (r.extent.length != 0)
        fail(Errc::BadImage, "punch record carries payload");
      if (r.epoch == 0) fail(Errc::BadImage, "punch record at epoch 0");
    }
    img.records.push_back(std::move(r));
  }
  if (in.remaining() != 0)
    fail(Errc::BadImage, "trailing bytes after last record");
  return img;
}

Bytes slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  Bytes data((std::istreambuf_iterator<char>(in)),
             std::istreambuf_iterator<char>());
  if (in.bad()) fail(Errc::IoError, "cannot read " + path);
  return data;
}

}  // namespace

void write(const std::string& path, const Image& img) {
  const Bytes file = encode(img);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot create " + tmp);
    out.write(reinterpret_cast<const char*>(file.data()),
              static_cast<std::streamsize>(file.size()));
    out.flush();
    if (!out) fail(Errc::IoError, "cannot write " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Errc::IoError, "cannot rename " + tmp + ": " + ec.message());
}

Image read(const std::string& path) { return parse(slurp(path)); }

FsckReport fsck(const std::string& path) {
  FsckReport report;
  Bytes data;
  try {
    data = slurp(path);
  } catch (const Error& e) {
    report.problems.push_back(e.what());
    return report;
  }
  // best-effort header peek so a damaged image still identifies itself
  if (data.size() >= 4 + 2 + 16 + 8 + 8 &&
      std::memcmp(data.data(), kMagic, 4) == 0) {
    std::memcpy(report.container_id.bytes.data(), data.data() + 6, 16);
    std::uint64_t committed = 0;
    for (int i = 0; i < 8; ++i)
      committed |= std::uint64_t{data[22 + static_cast<std::size_t>(i)]} << (8 * i);
    report.committed_version = committed;
  }
  try {
    Image img = parse(data);
    report.container_id = img.container_id;
    report.committed_version = img.committed_version;
    report.records = img.records.size();
    report.ok = true;
  } catch (const Error& e) {
    report.problems.push_back(e.what());
  }
  return report;
}

}  // namespace daosim::image
