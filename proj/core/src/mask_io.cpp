#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "json.hpp"
#include "lidarlabel/error.hpp"
#include "lidarlabel/fusion.hpp"

namespace lidarlabel {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::map<std::uint16_t, ObjectClass> read_class_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open class map " + path.string());
  std::map<std::uint16_t, ObjectClass> out;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [key, value] : j.items()) {
      const unsigned long id = std::stoul(key);
      if (id == 0 || id > 0xFFFF) fail(ErrorCode::kFormat, "class map id out of range: " + key);
      out[static_cast<std::uint16_t>(id)] = parse_object_class(value.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::kFormat, path.string() + ": class map keys must be integers");
  }
  return out;
}

}  // namespace

std::filesystem::path class_map_path(const std::filesystem::path& png) {
  std::filesystem::path out = png;
  out.replace_extension(".classes.json");
  return out;
}

SegMask load_mask(const std::filesystem::path& png, const std::filesystem::path& class_map) {
  FilePtr file(std::fopen(png.string().c_str(), "rb"));
  if (!file) fail(ErrorCode::kIo, "cannot open mask " + png.string());

  png_structp read = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!read) fail(ErrorCode::kIo, "libpng initialization failed");
  png_infop info = png_create_info_struct(read);
  if (!info) {
    png_destroy_read_struct(&read, nullptr, nullptr);
    fail(ErrorCode::kIo, "libpng initialization failed");
  }

  SegMask mask;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> raw;
  volatile bool ok = true;
  volatile int bit_depth = 0;
  volatile int color_type = 0;
  if (setjmp(png_jmpbuf(read))) {
    ok = false;
  } else {
    png_init_io(read, file.get());
    png_read_info(read, info);
    mask.width = static_cast<int>(png_get_image_width(read, info));
    mask.height = static_cast<int>(png_get_image_height(read, info));
    bit_depth = png_get_bit_depth(read, info);
    color_type = png_get_color_type(read, info);
    if (color_type == PNG_COLOR_TYPE_GRAY && (bit_depth == 16 || bit_depth == 8)) {
      const std::size_t bytes_per_px = static_cast<std::size_t>(bit_depth) / 8;
      const std::size_t stride = static_cast<std::size_t>(mask.width) * bytes_per_px;
      raw.resize(stride * static_cast<std::size_t>(mask.height));
      rows.resize(static_cast<std::size_t>(mask.height));
      for (int v = 0; v < mask.height; ++v) {
        rows[static_cast<std::size_t>(v)] = raw.data() + static_cast<std::size_t>(v) * stride;
      }
      png_read_image(read, rows.data());
      png_read_end(read, nullptr);
    }
  }
  png_destroy_read_struct(&read, &info, nullptr);
  if (!ok) fail(ErrorCode::kFormat, "corrupt PNG: " + png.string());
  if (color_type != PNG_COLOR_TYPE_GRAY || (bit_depth != 16 && bit_depth != 8)) {
    fail(ErrorCode::kFormat, "mask must be an 8- or 16-bit grayscale PNG: " + png.string());
  }

  const std::size_t n = static_cast<std::size_t>(mask.width) * static_cast<std::size_t>(mask.height);
  mask.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // PNG stores 16-bit samples big-endian.
    mask.ids[i] = bit_depth == 16
                      ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                      : raw[i];
  }
  mask.classes = read_class_map(class_map);
  validate(mask);
  return mask;
}

void write_mask(const SegMask& mask, const std::filesystem::path& png,
                const std::filesystem::path& class_map) {
  validate(mask);
  FilePtr file(std::fopen(png.string().c_str(), "wb"));
  if (!file) fail(ErrorCode::kIo, "cannot write mask " + png.string());

  png_structp write = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!write) fail(ErrorCode::kIo, "libpng initialization failed");
  png_infop info = png_create_info_struct(write);
  if (!info) {
    png_destroy_write_struct(&write, nullptr);
    fail(ErrorCode::kIo, "libpng initialization failed");
  }

  const std::size_t stride = static_cast<std::size_t>(mask.width) * 2;
  std::vector<std::uint8_t> raw(stride * static_cast<std::size_t>(mask.height));
  for (std::size_t i = 0; i < mask.ids.size(); ++i) {
    raw[2 * i] = static_cast<std::uint8_t>(mask.ids[i] >> 8);
    raw[2 * i + 1] = static_cast<std::uint8_t>(mask.ids[i] & 0xFF);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(mask.height));
  for (int v = 0; v < mask.height; ++v) {
    rows[static_cast<std::size_t>(v)] = raw.data() + static_cast<std::size_t>(v) * stride;
  }

  volatile bool ok = true;
  if (setjmp(png_jmpbuf(write))) {
    ok = false;
  } else {
    png_init_io(write, file.get());
    png_set_IHDR(write, info, static_cast<png_uint_32>(mask.width),
                 static_cast<png_uint_32>(mask.height), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(write, info);
    png_write_image(write, rows.data());
    png_write_end(write, nullptr);
  }
  png_destroy_write_struct(&write, &info);
  if (!ok) fail(ErrorCode::kIo, "failed writing PNG " + png.string());

  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, cls] : mask.classes) j[std::to_string(id)] = std::string(to_string(cls));
  std::ofstream out(class_map);
  if (!out) fail(ErrorCode::kIo, "cannot write " + class_map.string());
  out << j.dump(2) << '\n';
}

}  // namespace lidarlabel
