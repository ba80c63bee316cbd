#include "isfm/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace isfm {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

Tensor from_interleaved(const std::uint8_t* px, std::size_t channels, std::size_t h, std::size_t w) {
    Tensor t({channels, h, w});
    for (std::size_t c = 0; c < channels; ++c) {
        auto plane = t.channel(c);
        for (std::size_t i = 0; i < h * w; ++i) plane[i] = static_cast<float>(px[i * channels + c]) / 255.0f;
    }
    return t;
}

std::vector<std::uint8_t> to_interleaved(const Tensor& t) {
    const std::size_t C = t.channels();
    const std::size_t n = t.plane_size();
    std::vector<std::uint8_t> px(C * n);
    for (std::size_t c = 0; c < C; ++c) {
        auto plane = t.channel(c);
        for (std::size_t i = 0; i < n; ++i) px[i * C + c] = to_byte(plane[i]);
    }
    return px;
}

Tensor read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
        throw ImageError(ImageError::Kind::Format, "cannot decode PNG '" + path.string() + "': " + img.message);
    }
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t channels = color ? 3 : 1;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw ImageError(ImageError::Kind::Format, "cannot decode PNG '" + path.string() + "': " + msg);
    }
    return from_interleaved(buf.data(), channels, img.height, img.width);
}

void write_png(const std::filesystem::path& path, const Tensor& t) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(t.width());
    img.height = static_cast<png_uint_32>(t.height());
    img.format = t.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const auto px = to_interleaved(t);
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, px.data(), 0, nullptr)) {
        throw ImageError(ImageError::Kind::Io, "cannot write PNG '" + path.string() + "': " + img.message);
    }
}

class PnmHeader {
public:
    explicit PnmHeader(const std::vector<std::uint8_t>& b) : b_(b) {}

    std::size_t number(const std::string& what) {
        skip_space();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) {
            throw ImageError(ImageError::Kind::Format, "PNM header: expected " + what);
        }
        std::size_t v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + static_cast<std::size_t>(b_[pos_++] - '0');
            if (v > (1u << 24)) throw ImageError(ImageError::Kind::Format, "PNM header: " + what + " too large");
        }
        return v;
    }
    std::size_t pos() const { return pos_; }
    void advance() { ++pos_; }

private:
    void skip_space() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 2;
};

Tensor read_pnm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ImageError(ImageError::Kind::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) {
        throw ImageError(ImageError::Kind::Format, "'" + path.string() + "' is not a binary PGM/PPM (P5/P6)");
    }
    const std::size_t channels = b[1] == '6' ? 3 : 1;
    PnmHeader hdr(b);
    const std::size_t w = hdr.number("width");
    const std::size_t h = hdr.number("height");
    const std::size_t maxval = hdr.number("maxval");
    if (w == 0 || h == 0) throw ImageError(ImageError::Kind::Format, "'" + path.string() + "' has a zero extent");
    if (maxval != 255) {
        throw ImageError(ImageError::Kind::Format,
                         "'" + path.string() + "': only 8-bit (maxval 255) is supported, got " + std::to_string(maxval));
    }
    hdr.advance();
    const std::size_t need = w * h * channels;
    if (hdr.pos() > b.size() || b.size() - hdr.pos() < need) {
        throw ImageError(ImageError::Kind::Format, "'" + path.string() + "' pixel data is truncated");
    }
    return from_interleaved(b.data() + hdr.pos(), channels, h, w);
}

void write_pnm(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ImageError(ImageError::Kind::Io, "cannot open '" + path.string() + "' for writing");
    os << (t.channels() == 3 ? "P6" : "P5") << '\n' << t.width() << ' ' << t.height() << "\n255\n";
    const auto px = to_interleaved(t);
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!os) throw ImageError(ImageError::Kind::Io, "write to '" + path.string() + "' failed");
}

}  // namespace

std::uint8_t to_byte(float v) {
    const double q = std::floor(static_cast<double>(v) * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

bool is_image_path(const std::filesystem::path& path) {
    const std::string e = lower_ext(path);
    return e == ".png" || e == ".pgm" || e == ".ppm" || e == ".pnm";
}

Tensor read_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ImageError(ImageError::Kind::Io, "no such file '" + path.string() + "'");
    }
    const std::string e = lower_ext(path);
    if (e == ".png") return read_png(path);
    if (e == ".pgm" || e == ".ppm" || e == ".pnm") return read_pnm(path);
    throw ImageError(ImageError::Kind::Format, "unsupported image format '" + path.string() + "'");
}

void write_image(const std::filesystem::path& path, const Tensor& img) {
    require_chw(img, "write_image");
    if (img.channels() != 1 && img.channels() != 3) {
        throw DimensionError("write_image: expects 1 or 3 channels, got " + to_string(img.shape()));
    }
    const std::string e = lower_ext(path);
    if (e == ".png") {
        write_png(path, img);
    } else if (e == ".pgm" || e == ".ppm" || e == ".pnm") {
        if (e == ".pgm" && img.channels() != 1) {
            throw DimensionError("write_image: PGM needs a single channel");
        }
        if (e == ".ppm" && img.channels() != 3) {
            throw DimensionError("write_image: PPM needs three channels");
        }
        write_pnm(path, img);
    } else {
        throw ImageError(ImageError::Kind::Format, "unsupported output format '" + path.string() + "'");
    }
}

}  // namespace isfm
