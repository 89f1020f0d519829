#include <cctype>
#include <cstdio>
#include <fstream>
#include <string>

#include "driveperc/error.hpp"
#include "driveperc/image.hpp"

namespace dp {

Image::Image(int w, int h, PixelFormat fmt) : width(w), height(h), format(fmt) {
    if (w <= 0 || h <= 0) throw_parameter("image dimensions must be positive");
    pixels.assign(static_cast<size_t>(w) * h * channels(), 0);
}

namespace {

class HeaderReader {
public:
    HeaderReader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

    int get() {
        const int c = in_.get();
        if (c != EOF) ++offset_;
        return c;
    }

    // One token terminated by a single whitespace character.
    std::string token() {
        std::string t;
        int c = get();
        while (c != EOF && std::isspace(c)) c = get();
        while (c != EOF && !std::isspace(c)) {
            t.push_back(static_cast<char>(c));
            c = get();
        }
        if (t.empty()) fail("unexpected end of header");
        return t;
    }

    long parse_int(const std::string& what) {
        const std::string t = token();
        for (char ch : t)
            if (!std::isdigit(static_cast<unsigned char>(ch))) fail("malformed " + what + " '" + t + "'");
        return std::stol(t);
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw_format(path_ + ": " + msg + " at byte offset " + std::to_string(offset_));
    }

    long offset() const { return offset_; }

private:
    std::istream& in_;
    std::string path_;
    long offset_ = 0;
};

}  // namespace

Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open image file: " + path);
    HeaderReader hdr(in, path);

    const int m0 = hdr.get(), m1 = hdr.get();
    PixelFormat fmt;
    if (m0 == 'P' && m1 == '5')
        fmt = PixelFormat::Gray8;
    else if (m0 == 'P' && m1 == '6')
        fmt = PixelFormat::Rgb8;
    else
        hdr.fail("bad magic (expected P5 or P6)");

    const long w = hdr.parse_int("width");
    const long h = hdr.parse_int("height");
    const long maxval = hdr.parse_int("maxval");
    if (w <= 0 || h <= 0) hdr.fail("non-positive image dimensions");
    if (maxval != 255)
        throw_format(path + ": unsupported maxval " + std::to_string(maxval) + " (only 255 is supported)");

    Image img(static_cast<int>(w), static_cast<int>(h), fmt);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<size_t>(in.gcount()) != img.pixels.size())
        throw_format(path + ": truncated pixel data at byte offset " +
                     std::to_string(hdr.offset() + in.gcount()));
    return img;
}

void write_image(const Image& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io("cannot open image file for writing: " + path);
    out << (image.format == PixelFormat::Gray8 ? "P5" : "P6") << "\n"
        << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw_io("failed writing image: " + path);
}

}  // namespace dp
