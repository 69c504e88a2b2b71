#include "dyco/image.hpp"

#include "dyco/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dyco {

void write_pnm(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw Error(ErrorCode::DimensionMismatch, "PNM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

namespace {

void skip_ws_and_comments(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw Error(ErrorCode::CorruptFile, path + " is not a binary PPM/PGM");
  int w = 0, h = 0, maxval = 0;
  skip_ws_and_comments(in);
  in >> w;
  skip_ws_and_comments(in);
  in >> h;
  skip_ws_and_comments(in);
  in >> maxval;
  in.get();
  if (!in || w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::CorruptFile, "bad PNM header in " + path);
  Image img(w, h, magic == "P6" ? 3 : 1);
  std::vector<unsigned char> bytes(img.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw Error(ErrorCode::CorruptFile, "truncated pixel data in " + path);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image g(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels; ++c) s += img.at(x, y, c);
      g.at(x, y) = s / img.channels;
    }
  return g;
}

}  // namespace dyco
