#include "scriptor/image.hpp"

#include <zlib.h>

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace scriptor {

ImageU8 make_image(std::int64_t height, std::int64_t width, std::int64_t channels,
                   std::uint8_t fill) {
  if (height < 1 || width < 1 || (channels != 1 && channels != 3))
    throw ParameterError("bad image dimensions");
  ImageU8 img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(static_cast<std::size_t>(height * width * channels), fill);
  return img;
}

namespace {

// ---- portable anymap (P2/P3/P5/P6) ----

struct ByteReader {
  const std::vector<std::uint8_t>& b;
  std::size_t i = 0;

  bool eof() const { return i >= b.size(); }
  std::uint8_t next() {
    if (eof()) throw IoError("truncated image file");
    return b[i++];
  }
  // skips whitespace and # comments, then reads an unsigned decimal
  std::int64_t ascii_int() {
    for (;;) {
      if (eof()) throw IoError("truncated image header");
      std::uint8_t c = b[i];
      if (c == '#') {
        while (!eof() && b[i] != '\n') ++i;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++i;
      } else {
        break;
      }
    }
    if (!std::isdigit(b[i])) throw IoError("malformed image header");
    std::int64_t v = 0;
    while (!eof() && std::isdigit(b[i])) v = v * 10 + (b[i++] - '0');
    return v;
  }
};

ImageU8 decode_pnm(const std::vector<std::uint8_t>& bytes) {
  ByteReader r{bytes};
  char p = static_cast<char>(r.next());
  char kind = static_cast<char>(r.next());
  (void)p;
  bool ascii = kind == '2' || kind == '3';
  std::int64_t channels = (kind == '2' || kind == '5') ? 1 : 3;
  std::int64_t w = r.ascii_int();
  std::int64_t h = r.ascii_int();
  std::int64_t maxval = r.ascii_int();
  if (maxval <= 0 || maxval > 255) throw IoError("unsupported pnm maxval");
  ImageU8 img = make_image(h, w, channels);
  std::int64_t count = h * w * channels;
  if (ascii) {
    for (std::int64_t k = 0; k < count; ++k) {
      std::int64_t v = r.ascii_int();
      if (v > maxval) throw IoError("pnm sample exceeds maxval");
      img.pixels[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(v);
    }
  } else {
    r.next();  // exactly one whitespace byte separates maxval from binary data
    if (r.i + static_cast<std::size_t>(count) > bytes.size())
      throw IoError("truncated pnm pixel data");
    std::memcpy(img.pixels.data(), bytes.data() + r.i, static_cast<std::size_t>(count));
  }
  return img;
}

// ---- png ----

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

const std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
  int p = int(a) + int(b) - int(c);
  int pa = std::abs(p - int(a));
  int pb = std::abs(p - int(b));
  int pc = std::abs(p - int(c));
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

ImageU8 decode_png_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw IoError("not a png file");
  std::size_t i = 8;
  std::int64_t w = 0, h = 0;
  int color_type = -1;
  std::vector<std::uint8_t> idat;
  bool saw_end = false;
  while (i + 8 <= bytes.size() && !saw_end) {
    std::uint32_t len = be32(bytes.data() + i);
    if (i + 12 + len > bytes.size()) throw IoError("truncated png chunk");
    const std::uint8_t* type = bytes.data() + i + 4;
    const std::uint8_t* data = bytes.data() + i + 8;
    std::uint32_t want_crc = be32(data + len);
    std::uint32_t got_crc = static_cast<std::uint32_t>(
        crc32(crc32(0L, type, 4), data, len));
    if (want_crc != got_crc) throw IoError("png chunk crc mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IoError("bad png header");
      w = be32(data);
      h = be32(data + 4);
      int bit_depth = data[8];
      color_type = data[9];
      if (bit_depth != 8) throw IoError("unsupported png bit depth");
      if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
        throw IoError("unsupported png color type");
      if (data[10] != 0 || data[11] != 0) throw IoError("unsupported png compression");
      if (data[12] != 0) throw IoError("interlaced png unsupported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
    }
    i += 12 + len;
  }
  if (w <= 0 || h <= 0 || color_type < 0 || idat.empty())
    throw IoError("incomplete png file");

  std::int64_t src_ch = (color_type == 0) ? 1 : (color_type == 2) ? 3
                        : (color_type == 4) ? 2 : 4;
  std::int64_t stride = w * src_ch;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h * (stride + 1)));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (rc != Z_OK || raw_len != raw.size()) throw IoError("png inflate failed");

  // undo per-scanline filters in place
  std::vector<std::uint8_t> prev(static_cast<std::size_t>(stride), 0);
  std::vector<std::uint8_t> cur(static_cast<std::size_t>(stride), 0);
  std::int64_t bpp = src_ch;
  std::vector<std::uint8_t> flat;
  flat.reserve(static_cast<std::size_t>(h * stride));
  for (std::int64_t y = 0; y < h; ++y) {
    const std::uint8_t* row = raw.data() + y * (stride + 1);
    std::uint8_t filter = row[0];
    for (std::int64_t x = 0; x < stride; ++x) {
      std::uint8_t rv = row[1 + x];
      std::uint8_t left = x >= bpp ? cur[static_cast<std::size_t>(x - bpp)] : 0;
      std::uint8_t up = prev[static_cast<std::size_t>(x)];
      std::uint8_t ul = x >= bpp ? prev[static_cast<std::size_t>(x - bpp)] : 0;
      std::uint8_t v;
      switch (filter) {
        case 0: v = rv; break;
        case 1: v = static_cast<std::uint8_t>(rv + left); break;
        case 2: v = static_cast<std::uint8_t>(rv + up); break;
        case 3: v = static_cast<std::uint8_t>(rv + ((int(left) + int(up)) >> 1)); break;
        case 4: v = static_cast<std::uint8_t>(rv + paeth(left, up, ul)); break;
        default: throw IoError("unknown png filter type");
      }
      cur[static_cast<std::size_t>(x)] = v;
    }
    flat.insert(flat.end(), cur.begin(), cur.end());
    std::swap(prev, cur);
  }

  // collapse alpha over a white background
  std::int64_t out_ch = (src_ch <= 2) ? 1 : 3;
  ImageU8 img = make_image(h, w, out_ch);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const std::uint8_t* px = flat.data() + (y * w + x) * src_ch;
      if (src_ch == 1) {
        img.at(y, x) = px[0];
      } else if (src_ch == 2) {
        int a = px[1];
        img.at(y, x) = static_cast<std::uint8_t>((px[0] * a + 255 * (255 - a) + 127) / 255);
      } else if (src_ch == 3) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = px[c];
      } else {
        int a = px[3];
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) =
              static_cast<std::uint8_t>((px[c] * a + 255 * (255 - a) + 127) / 255);
      }
    }
  }
  return img;
}

void push_chunk(std::vector<std::uint8_t>& out, const char* type,
                const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  // crc32 treats a null buffer as a reset, so keep the pointer non-null
  static const std::uint8_t dummy = 0;
  const std::uint8_t* payload = data.empty() ? &dummy : data.data();
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, out.data() + type_at, 4), payload, static_cast<uInt>(data.size())));
  put_be32(out, crc);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3) throw ParameterError("png needs 1 or 3 channels");
  std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);            // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  push_chunk(out, "IHDR", ihdr);

  std::int64_t stride = img.width * img.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(img.height * (stride + 1)));
  for (std::int64_t y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    const std::uint8_t* row = img.pixels.data() + y * stride;
    raw.insert(raw.end(), row, row + stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(bound);
  if (compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("png deflate failed");
  packed.resize(bound);
  push_chunk(out, "IDAT", packed);
  push_chunk(out, "IEND", {});
  return out;
}

ImageU8 decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
    return decode_png_bytes(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' &&
      (bytes[1] == '2' || bytes[1] == '3' || bytes[1] == '5' || bytes[1] == '6'))
    return decode_pnm(bytes);
  throw IoError("unrecognized image format");
}

ImageU8 load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

void save_pgm(const ImageU8& img, const std::string& path) {
  if (img.channels != 1) throw ParameterError("pgm stores grayscale only");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("image write failed: " + path);
}

void save_png(const ImageU8& img, const std::string& path) {
  std::vector<std::uint8_t> bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("image write failed: " + path);
}

ImageU8 pad_to_multiple(const ImageU8& img, std::int64_t multiple) {
  if (multiple < 1) throw ParameterError("pad multiple must be positive");
  std::int64_t h = ((img.height + multiple - 1) / multiple) * multiple;
  std::int64_t w = ((img.width + multiple - 1) / multiple) * multiple;
  if (h == img.height && w == img.width) return img;
  ImageU8 out = make_image(h, w, img.channels, 255);
  for (std::int64_t y = 0; y < img.height; ++y) {
    std::memcpy(&out.at(y, 0, 0), &img.pixels[static_cast<std::size_t>(
                                      y * img.width * img.channels)],
                static_cast<std::size_t>(img.width * img.channels));
  }
  return out;
}

Tensor image_to_tensor(const ImageU8& img) {
  Tensor t = Tensor::zeros({3, img.height, img.width});
  double* d = t.data().data();
  std::int64_t plane = img.height * img.width;
  for (std::int64_t y = 0; y < img.height; ++y) {
    for (std::int64_t x = 0; x < img.width; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) {
        std::uint8_t v = img.channels == 1 ? img.at(y, x) : img.at(y, x, c);
        d[c * plane + y * img.width + x] = static_cast<double>(v) / 255.0;
      }
    }
  }
  return t;
}

Tensor load_image_tensor(const std::string& path, std::int64_t pad_multiple) {
  return image_to_tensor(pad_to_multiple(load_image(path), pad_multiple));
}

}  // namespace scriptor
