#pragma once

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "relume/imaging/image.hpp"

namespace relume::imaging {

namespace detail {

struct FileHandle {
    std::FILE* f = nullptr;
    explicit FileHandle(std::FILE* fp) : f(fp) {}
    ~FileHandle() {
        if (f) std::fclose(f);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

// interleaved 8-bit RGB rows -> planar [0,1] tensor
inline ImageTensor from_rgb8(const std::vector<unsigned char>& rgb, int h, int w) {
    Tensor<float> t(Shape{3, h, w});
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    for (std::int64_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c)
            t[c * hw + p] = static_cast<float>(rgb[static_cast<size_t>(p) * 3 + c]) / 255.0f;
    return {std::move(t), Range::Unit, ColorSpace::Rgb};
}

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
    (void)msg;
    std::longjmp(*static_cast<std::jmp_buf*>(png_get_error_ptr(png)), 1);
}
inline void png_warn_fn(png_structp, png_const_charp) {}

inline ImageTensor load_png(std::FILE* f, const std::string& path) {
    std::jmp_buf jb;
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &jb, &png_error_fn, &png_warn_fn);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(jb)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("undecodable PNG: " + path);
    }
    png_init_io(png, f);
    png_read_info(png, info);
    // normalize every input layout to 8-bit RGB
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unexpected PNG layout: " + path);
    }
    pixels.resize(static_cast<size_t>(h) * stride);
    rows.resize(static_cast<size_t>(h));
    for (int i = 0; i < h; ++i) rows[static_cast<size_t>(i)] = pixels.data() + i * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(pixels, h, w);
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jb;
};

[[noreturn]] inline void jpeg_error_exit(j_common_ptr cinfo) {
    std::longjmp(reinterpret_cast<JpegErrorMgr*>(cinfo->err)->jb, 1);
}

inline ImageTensor load_jpeg(std::FILE* f, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = &jpeg_error_exit;
    if (setjmp(err.jb)) {
        jpeg_destroy_decompress(&cinfo);
        throw FormatError("undecodable JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    std::vector<unsigned char> pixels(static_cast<size_t>(h) * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = pixels.data() + static_cast<size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_rgb8(pixels, h, w);
}

} // namespace detail

// Decodes by signature, not extension, so mislabeled files still load.
inline ImageTensor load_image(const std::string& path) {
    if (!std::filesystem::exists(path)) throw NotFoundError("no such image: " + path);
    detail::FileHandle fh(std::fopen(path.c_str(), "rb"));
    if (!fh.f) throw IoError("cannot open " + path);
    unsigned char sig[8] = {};
    const size_t got = std::fread(sig, 1, 8, fh.f);
    std::rewind(fh.f);
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return detail::load_png(fh.f, path);
    if (got >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) return detail::load_jpeg(fh.f, path);
    throw FormatError("unrecognized image format: " + path);
}

inline void save_image(const ImageTensor& img, const std::string& path) {
    if (img.range != Range::Unit)
        throw ArgumentError("save_image: convert to [0,1] before writing");
    const int c = img.channels(), h = img.height(), w = img.width();
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    std::vector<unsigned char> rgb(static_cast<size_t>(hw) * 3);
    for (std::int64_t p = 0; p < hw; ++p)
        for (int ch = 0; ch < 3; ++ch) {
            const float v = img.data[(c == 3 ? ch : 0) * hw + p];
            const float q = std::min(1.0f, std::max(0.0f, v)) * 255.0f;
            rgb[static_cast<size_t>(p) * 3 + ch] = static_cast<unsigned char>(std::lround(q));
        }

    const std::string ext = std::filesystem::path(path).extension().string();
    const bool jpeg = ext == ".jpg" || ext == ".jpeg" || ext == ".JPG" || ext == ".JPEG";

    detail::FileHandle fh(std::fopen(path.c_str(), "wb"));
    if (!fh.f) throw IoError("cannot write " + path);

    if (jpeg) {
        jpeg_compress_struct cinfo;
        detail::JpegErrorMgr err;
        cinfo.err = jpeg_std_error(&err.pub);
        err.pub.error_exit = &detail::jpeg_error_exit;
        if (setjmp(err.jb)) {
            jpeg_destroy_compress(&cinfo);
            throw IoError("JPEG encode failed: " + path);
        }
        jpeg_create_compress(&cinfo);
        jpeg_stdio_dest(&cinfo, fh.f);
        cinfo.image_width = static_cast<JDIMENSION>(w);
        cinfo.image_height = static_cast<JDIMENSION>(h);
        cinfo.input_components = 3;
        cinfo.in_color_space = JCS_RGB;
        jpeg_set_defaults(&cinfo);
        jpeg_set_quality(&cinfo, 95, TRUE);
        jpeg_start_compress(&cinfo, TRUE);
        while (cinfo.next_scanline < cinfo.image_height) {
            unsigned char* row = rgb.data() + static_cast<size_t>(cinfo.next_scanline) * w * 3;
            jpeg_write_scanlines(&cinfo, &row, 1);
        }
        jpeg_finish_compress(&cinfo);
        jpeg_destroy_compress(&cinfo);
        return;
    }

    std::jmp_buf jb;
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &jb, &detail::png_error_fn, &detail::png_warn_fn);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(jb)) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + path);
    }
    png_init_io(png, fh.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int i = 0; i < h; ++i)
        png_write_row(png, rgb.data() + static_cast<size_t>(i) * w * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace relume::imaging
