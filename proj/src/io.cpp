#include "irmesh/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <openssl/evp.h>
#include <png.h>

#include <json.hpp>

namespace irmesh {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const fs::path& path, const std::string& message) {
    throw std::runtime_error(path.string() + ": " + message);
}

[[noreturn]] void fail_line(const fs::path& path, int line, const std::string& message) {
    fail(path, "line " + std::to_string(line) + ": " + message);
}

std::ifstream open_input(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) fail(path, "cannot open for reading");
    return in;
}

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) fail(path, "cannot open for writing");
    return out;
}

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

// Full round-trip precision for doubles.
std::ostream& precise(std::ostream& out) { return out << std::setprecision(17); }

double parse_double(const fs::path& path, int line, const std::string& token) {
    try {
        size_t used = 0;
        const double value = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return value;
    } catch (const std::exception&) {
        fail_line(path, line, "expected a number, got '" + token + "'");
    }
}

long parse_long(const fs::path& path, int line, const std::string& token) {
    try {
        size_t used = 0;
        const long value = std::stol(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return value;
    } catch (const std::exception&) {
        fail_line(path, line, "expected an integer, got '" + token + "'");
    }
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

TriangleMesh load_ply(const fs::path& path) {
    std::ifstream in = open_input(path);
    std::string line;
    int line_no = 0;
    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++line_no;
            if (!out.empty() && out.back() == '\r') out.pop_back();
            return true;
        }
        return false;
    };

    if (!next_line(line) || line != "ply") fail(path, "not a PLY file (missing 'ply' magic)");

    long vertex_count = -1, face_count = -1;
    int x_index = -1, y_index = -1, z_index = -1;
    int vertex_property_count = 0;
    std::string element;  // element whose properties we are reading
    bool header_done = false;
    while (next_line(line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word.empty() || word == "comment") continue;
        if (word == "format") {
            std::string kind, version;
            ls >> kind >> version;
            if (kind != "ascii") fail_line(path, line_no, "only ascii PLY is supported");
        } else if (word == "element") {
            std::string count;
            ls >> element >> count;
            if (element == "vertex") vertex_count = parse_long(path, line_no, count);
            else if (element == "face") face_count = parse_long(path, line_no, count);
        } else if (word == "property") {
            if (element == "vertex") {
                std::string type, name;
                ls >> type >> name;
                if (type == "list") fail_line(path, line_no, "list property on vertices");
                if (name == "x") x_index = vertex_property_count;
                if (name == "y") y_index = vertex_property_count;
                if (name == "z") z_index = vertex_property_count;
                ++vertex_property_count;
            }
        } else if (word == "end_header") {
            header_done = true;
            break;
        } else {
            fail_line(path, line_no, "unrecognized header keyword '" + word + "'");
        }
    }
    if (!header_done) fail(path, "unterminated PLY header");
    if (vertex_count < 0) fail(path, "missing vertex element");
    if (face_count < 0) fail(path, "missing face element");
    if (x_index < 0 || y_index < 0 || z_index < 0) fail(path, "vertex element lacks x/y/z");

    TriangleMesh mesh;
    mesh.vertices.reserve(vertex_count);
    for (long v = 0; v < vertex_count; ++v) {
        if (!next_line(line)) fail(path, "unexpected end of file in vertex data");
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string token;
        while (ls >> token) tokens.push_back(token);
        if (static_cast<int>(tokens.size()) < vertex_property_count)
            fail_line(path, line_no, "short vertex record");
        mesh.vertices.emplace_back(parse_double(path, line_no, tokens[x_index]),
                                   parse_double(path, line_no, tokens[y_index]),
                                   parse_double(path, line_no, tokens[z_index]));
    }
    mesh.faces.reserve(face_count);
    for (long f = 0; f < face_count; ++f) {
        if (!next_line(line)) fail(path, "unexpected end of file in face data");
        std::istringstream ls(line);
        std::string count_token;
        ls >> count_token;
        if (parse_long(path, line_no, count_token) != 3)
            fail_line(path, line_no, "only triangular faces are supported");
        std::array<int, 3> face{};
        for (int e = 0; e < 3; ++e) {
            std::string idx;
            if (!(ls >> idx)) fail_line(path, line_no, "short face record");
            const long value = parse_long(path, line_no, idx);
            if (value < 0 || value >= vertex_count) fail_line(path, line_no, "vertex index out of range");
            face[e] = static_cast<int>(value);
        }
        mesh.faces.push_back(face);
    }
    return mesh;
}

void save_ply(const TriangleMesh& mesh, const fs::path& path) {
    std::ofstream out = open_output(path);
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    precise(out);
    for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& f : mesh.faces) out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
    if (!out) fail(path, "write failed");
}

// ---------------------------------------------------------------------------
// OBJ
// ---------------------------------------------------------------------------

TriangleMesh load_obj(const fs::path& path) {
    std::ifstream in = open_input(path);
    TriangleMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word) || word[0] == '#') continue;
        if (word == "v") {
            std::string xs, ys, zs;
            if (!(ls >> xs >> ys >> zs)) fail_line(path, line_no, "short vertex record");
            mesh.vertices.emplace_back(parse_double(path, line_no, xs), parse_double(path, line_no, ys),
                                       parse_double(path, line_no, zs));
        } else if (word == "f") {
            std::array<int, 3> face{};
            std::string ref;
            for (int e = 0; e < 3; ++e) {
                if (!(ls >> ref)) fail_line(path, line_no, "faces must have three vertices");
                // "i", "i/t", "i/t/n", "i//n": the vertex index leads.
                const long idx = parse_long(path, line_no, ref.substr(0, ref.find('/')));
                if (idx < 1 || idx > static_cast<long>(mesh.vertices.size()))
                    fail_line(path, line_no, "vertex index out of range");
                face[e] = static_cast<int>(idx - 1);
            }
            if (ls >> ref) fail_line(path, line_no, "faces must have three vertices");
            mesh.faces.push_back(face);
        }
        // vn/vt/usemtl/... carry no geometry we track; skip them.
    }
    return mesh;
}

void save_obj(const TriangleMesh& mesh, const fs::path& path) {
    std::ofstream out = open_output(path);
    precise(out);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    if (!out) fail(path, "write failed");
}

// ---------------------------------------------------------------------------
// PFM (grayscale, 32-bit float, rows bottom-up, scale sign = endianness)
// ---------------------------------------------------------------------------

ShadingImage load_pfm(const fs::path& path) {
    std::ifstream in = open_input(path, std::ios::in | std::ios::binary);
    std::string magic;
    in >> magic;
    if (magic == "PF") fail(path, "color PFM is not supported (expected grayscale 'Pf')");
    if (magic != "Pf") fail(path, "not a PFM file");
    int width = 0, height = 0;
    double scale = 0.0;
    if (!(in >> width >> height >> scale) || width <= 0 || height <= 0 || scale == 0.0)
        fail(path, "malformed PFM header");
    in.get();  // single whitespace byte terminating the header

    ShadingImage image = ShadingImage::zeros(width, height);
    std::vector<float> row(width);
    const bool file_little_endian = scale < 0.0;
    for (int y = height - 1; y >= 0; --y) {  // PFM rows run bottom-up
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(width * sizeof(float)));
        if (!in) fail(path, "truncated pixel data");
        for (int x = 0; x < width; ++x) {
            float value = row[x];
            if (file_little_endian != (std::endian::native == std::endian::little)) {
                std::uint32_t bits;
                std::memcpy(&bits, &value, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&value, &bits, 4);
            }
            image.at(x, y) = static_cast<double>(value);
        }
    }
    return image;
}

void save_pfm(const ShadingImage& image, const fs::path& path) {
    if (image.width <= 0 || image.height <= 0) fail(path, "cannot save an empty image");
    std::ofstream out = open_output(path, std::ios::out | std::ios::binary);
    const char* scale = std::endian::native == std::endian::little ? "-1.0" : "1.0";
    out << "Pf\n" << image.width << " " << image.height << "\n" << scale << "\n";
    std::vector<float> row(image.width);
    for (int y = image.height - 1; y >= 0; --y) {
        for (int x = 0; x < image.width; ++x) row[x] = static_cast<float>(image.at(x, y));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) fail(path, "write failed");
}

// ---------------------------------------------------------------------------
// PNG (grayscale, 16-bit; 8-bit accepted on load)
// ---------------------------------------------------------------------------

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* file = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (file) std::fclose(file);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* file = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (file) std::fclose(file);
    }
};

ShadingImage load_png(const fs::path& path) {
    PngReader r;
    r.file = std::fopen(path.string().c_str(), "rb");
    if (!r.file) fail(path, "cannot open for reading");
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = r.png ? png_create_info_struct(r.png) : nullptr;
    if (!r.png || !r.info) fail(path, "libpng initialization failed");
    if (setjmp(png_jmpbuf(r.png))) fail(path, "not a readable PNG file");

    png_init_io(r.png, r.file);
    png_read_info(r.png, r.info);
    const png_uint_32 width = png_get_image_width(r.png, r.info);
    const png_uint_32 height = png_get_image_height(r.png, r.info);
    const int depth = png_get_bit_depth(r.png, r.info);
    const int color = png_get_color_type(r.png, r.info);
    if (color != PNG_COLOR_TYPE_GRAY) fail(path, "only grayscale PNG is supported");
    if (depth != 16 && depth != 8) fail(path, "only 8- or 16-bit PNG is supported");
    if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(r.png);
    png_read_update_info(r.png, r.info);

    ShadingImage image = ShadingImage::zeros(static_cast<int>(width), static_cast<int>(height));
    if (depth == 16) {
        std::vector<std::uint16_t> row(width);
        for (png_uint_32 y = 0; y < height; ++y) {
            png_read_row(r.png, reinterpret_cast<png_bytep>(row.data()), nullptr);
            for (png_uint_32 x = 0; x < width; ++x)
                image.at(static_cast<int>(x), static_cast<int>(y)) = row[x] / 65535.0;
        }
    } else {
        std::vector<std::uint8_t> row(width);
        for (png_uint_32 y = 0; y < height; ++y) {
            png_read_row(r.png, row.data(), nullptr);
            for (png_uint_32 x = 0; x < width; ++x)
                image.at(static_cast<int>(x), static_cast<int>(y)) = row[x] / 255.0;
        }
    }
    png_read_end(r.png, nullptr);
    return image;
}

void save_png(const ShadingImage& image, const fs::path& path) {
    if (image.width <= 0 || image.height <= 0) fail(path, "cannot save an empty image");
    PngWriter w;
    w.file = std::fopen(path.string().c_str(), "wb");
    if (!w.file) fail(path, "cannot open for writing");
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    w.info = w.png ? png_create_info_struct(w.png) : nullptr;
    if (!w.png || !w.info) fail(path, "libpng initialization failed");
    if (setjmp(png_jmpbuf(w.png))) fail(path, "PNG write failed");

    png_init_io(w.png, w.file);
    png_set_IHDR(w.png, w.info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    if (std::endian::native == std::endian::little) png_set_swap(w.png);

    std::vector<std::uint16_t> row(image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double v = std::clamp(image.at(x, y), 0.0, 1.0);
            row[x] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
        png_write_row(w.png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(w.png, nullptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dispatch by extension
// ---------------------------------------------------------------------------

TriangleMesh load_mesh(const fs::path& path) {
    const std::string ext = lower_extension(path);
    TriangleMesh mesh;
    if (ext == ".ply") mesh = load_ply(path);
    else if (ext == ".obj") mesh = load_obj(path);
    else fail(path, "unsupported mesh format '" + ext + "' (use .ply or .obj)");
    if (mesh.vertices.empty() || mesh.faces.empty()) fail(path, "mesh has no geometry");
    build_adjacency(mesh);
    compute_vertex_normals(mesh);
    return mesh;
}

void save_mesh(const TriangleMesh& mesh, const fs::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".ply") save_ply(mesh, path);
    else if (ext == ".obj") save_obj(mesh, path);
    else fail(path, "unsupported mesh format '" + ext + "' (use .ply or .obj)");
}

ShadingImage load_image(const fs::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".pfm") return load_pfm(path);
    if (ext == ".png") return load_png(path);
    fail(path, "unsupported image format '" + ext + "' (use .pfm or .png)");
}

void save_image(const ShadingImage& image, const fs::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".pfm") return save_pfm(image, path);
    if (ext == ".png") return save_png(image, path);
    fail(path, "unsupported image format '" + ext + "' (use .pfm or .png)");
}

// ---------------------------------------------------------------------------
// Views files
// ---------------------------------------------------------------------------

std::vector<View> load_views(const fs::path& path) {
    std::ifstream in = open_input(path);
    std::vector<View> views;

    std::string line;
    int line_no = 0;
    bool in_record = false;
    int record_line = 0;
    View view;
    std::string image_name;
    bool gamma_applied = false;
    std::vector<std::string> seen;

    auto tokens_of = [&](const std::string& text) {
        std::istringstream ls(text);
        std::vector<std::string> tokens;
        std::string token;
        while (ls >> token) tokens.push_back(token);
        return tokens;
    };
    auto need = [&](const std::vector<std::string>& tokens, size_t count) {
        if (tokens.size() != count + 1)
            fail_line(path, line_no,
                      "'" + tokens[0] + "' expects " + std::to_string(count) + " values");
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::vector<std::string> tokens = tokens_of(line);
        if (tokens.empty() || tokens[0][0] == '#') continue;
        const std::string& key = tokens[0];

        if (!in_record) {
            if (key != "view") fail_line(path, line_no, "expected 'view', got '" + key + "'");
            in_record = true;
            record_line = line_no;
            view = View{};
            image_name.clear();
            gamma_applied = false;
            seen.clear();
            continue;
        }
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            fail_line(path, line_no, "duplicate '" + key + "' in one record");
        seen.push_back(key);

        if (key == "image") {
            need(tokens, 1);
            image_name = tokens[1];
        } else if (key == "gamma_applied") {
            need(tokens, 1);
            const long flag = parse_long(path, line_no, tokens[1]);
            if (flag != 0 && flag != 1) fail_line(path, line_no, "gamma_applied must be 0 or 1");
            gamma_applied = flag == 1;
        } else if (key == "intrinsics") {
            need(tokens, 6);
            view.intrinsics.fx = parse_double(path, line_no, tokens[1]);
            view.intrinsics.fy = parse_double(path, line_no, tokens[2]);
            view.intrinsics.cx = parse_double(path, line_no, tokens[3]);
            view.intrinsics.cy = parse_double(path, line_no, tokens[4]);
            view.intrinsics.width = static_cast<int>(parse_long(path, line_no, tokens[5]));
            view.intrinsics.height = static_cast<int>(parse_long(path, line_no, tokens[6]));
        } else if (key == "rotation") {
            need(tokens, 9);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    view.pose.rotation(r, c) = parse_double(path, line_no, tokens[1 + 3 * r + c]);
        } else if (key == "translation") {
            need(tokens, 3);
            for (int i = 0; i < 3; ++i)
                view.pose.translation[i] = parse_double(path, line_no, tokens[1 + i]);
        } else if (key == "light_offset") {
            need(tokens, 3);
            for (int i = 0; i < 3; ++i) view.light_offset[i] = parse_double(path, line_no, tokens[1 + i]);
        } else if (key == "end") {
            for (const char* field : {"image", "intrinsics", "rotation", "translation"}) {
                if (std::find(seen.begin(), seen.end(), field) == seen.end())
                    fail_line(path, line_no, "record starting at line " + std::to_string(record_line) +
                                                 " is missing '" + field + "'");
            }
            try {
                view.pose.validate();
            } catch (const std::exception& error) {
                fail_line(path, line_no, "record starting at line " + std::to_string(record_line) +
                                             ": " + error.what());
            }
            view.image = load_image(path.parent_path() / image_name);
            view.image.gamma_applied = gamma_applied;
            try {
                view.validate();
            } catch (const std::exception& error) {
                fail_line(path, line_no, "record starting at line " + std::to_string(record_line) +
                                             ": " + error.what());
            }
            views.push_back(std::move(view));
            in_record = false;
        } else {
            fail_line(path, line_no, "unrecognized key '" + key + "'");
        }
    }
    if (in_record) fail(path, "unterminated record starting at line " + std::to_string(record_line));
    return views;
}

void save_views(const std::vector<View>& views, const fs::path& path,
                const std::string& image_extension) {
    if (image_extension != ".pfm" && image_extension != ".png")
        fail(path, "unsupported image extension '" + image_extension + "'");
    std::ofstream out = open_output(path);
    precise(out);
    out << "# irmesh views\n";
    const std::string stem = path.stem().string();
    for (size_t k = 0; k < views.size(); ++k) {
        const View& view = views[k];
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_%03zu%s", k, image_extension.c_str());
        const std::string image_name = stem + suffix;
        save_image(view.image, path.parent_path() / image_name);

        out << "view\n";
        out << "  image " << image_name << "\n";
        out << "  gamma_applied " << (view.image.gamma_applied ? 1 : 0) << "\n";
        out << "  intrinsics " << view.intrinsics.fx << " " << view.intrinsics.fy << " "
            << view.intrinsics.cx << " " << view.intrinsics.cy << " " << view.intrinsics.width << " "
            << view.intrinsics.height << "\n";
        out << "  rotation";
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out << " " << view.pose.rotation(r, c);
        out << "\n";
        out << "  translation " << view.pose.translation.x() << " " << view.pose.translation.y()
            << " " << view.pose.translation.z() << "\n";
        out << "  light_offset " << view.light_offset.x() << " " << view.light_offset.y() << " "
            << view.light_offset.z() << "\n";
        out << "end\n";
    }
    if (!out) fail(path, "write failed");
}

// ---------------------------------------------------------------------------
// Albedo files and label maps
// ---------------------------------------------------------------------------

AlbedoModel load_albedo(const fs::path& path) {
    std::ifstream in = open_input(path);
    std::string key;
    AlbedoModel model;
    if (!(in >> key) || key != "mode") fail(path, "expected 'mode global|grouped'");
    std::string mode;
    in >> mode;
    if (mode == "global") {
        model.mode = AlbedoMode::Global;
        if (!(in >> key >> model.global_value) || key != "value")
            fail(path, "expected 'value <number>'");
    } else if (mode == "grouped") {
        model.mode = AlbedoMode::Grouped;
        size_t groups = 0;
        if (!(in >> key >> groups) || key != "groups" || groups == 0)
            fail(path, "expected 'groups <count>'");
        if (!(in >> key) || key != "values") fail(path, "expected 'values ...'");
        model.group_values.resize(groups);
        for (double& v : model.group_values)
            if (!(in >> v)) fail(path, "short group value list");
        size_t labels = 0;
        if (!(in >> key >> labels) || key != "labels") fail(path, "expected 'labels <count>'");
        model.labels.resize(labels);
        for (int& l : model.labels)
            if (!(in >> l)) fail(path, "short label list");
    } else {
        fail(path, "unknown mode '" + mode + "'");
    }
    return model;
}

void save_albedo(const AlbedoModel& model, const fs::path& path) {
    std::ofstream out = open_output(path);
    precise(out);
    if (model.mode == AlbedoMode::Global) {
        out << "mode global\nvalue " << model.global_value << "\n";
    } else {
        out << "mode grouped\ngroups " << model.group_values.size() << "\nvalues";
        for (double v : model.group_values) out << " " << v;
        out << "\nlabels " << model.labels.size() << "\n";
        for (size_t i = 0; i < model.labels.size(); ++i)
            out << model.labels[i] << ((i + 1) % 16 == 0 ? "\n" : " ");
        out << "\n";
    }
    if (!out) fail(path, "write failed");
}

std::vector<int> load_labels(const fs::path& path) {
    std::ifstream in = open_input(path);
    std::vector<int> labels;
    int value = 0;
    while (in >> value) labels.push_back(value);
    if (!in.eof()) fail(path, "malformed label entry");
    return labels;
}

void save_labels(const std::vector<int>& labels, const fs::path& path) {
    std::ofstream out = open_output(path);
    for (int l : labels) out << l << "\n";
    if (!out) fail(path, "write failed");
}

// ---------------------------------------------------------------------------
// Scene directories
// ---------------------------------------------------------------------------

namespace {

LightModel load_light(const fs::path& path) {
    std::ifstream in = open_input(path);
    LightModel light;
    std::string key;
    while (in >> key) {
        if (key == "brightness") in >> light.brightness_c;
        else if (key == "ambient") in >> light.ambient;
        else if (key == "gamma") in >> light.gamma;
        else fail(path, "unrecognized key '" + key + "'");
        if (!in) fail(path, "missing value after '" + key + "'");
    }
    return light;
}

void save_light(const LightModel& light, const fs::path& path) {
    std::ofstream out = open_output(path);
    precise(out);
    out << "brightness " << light.brightness_c << "\n"
        << "ambient " << light.ambient << "\n"
        << "gamma " << light.gamma << "\n";
    if (!out) fail(path, "write failed");
}

}  // namespace

void save_scene(const SyntheticScene& scene, const fs::path& directory) {
    fs::create_directories(directory);
    std::vector<fs::path> files;
    save_mesh(scene.ground_truth, directory / "truth.ply");
    files.emplace_back("truth.ply");
    save_mesh(scene.degraded, directory / "degraded.ply");
    files.emplace_back("degraded.ply");
    save_views(scene.views, directory / "views.txt");
    files.emplace_back("views.txt");
    for (size_t k = 0; k < scene.views.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "views_%03zu.pfm", k);
        files.emplace_back(name);
    }
    save_albedo(scene.albedo, directory / "albedo.txt");
    files.emplace_back("albedo.txt");
    save_labels(scene.material_labels, directory / "labels.txt");
    files.emplace_back("labels.txt");
    save_light(scene.light, directory / "light.txt");
    files.emplace_back("light.txt");
    write_manifest(directory, files);
}

SyntheticScene load_scene(const fs::path& directory) {
    SyntheticScene scene;
    scene.ground_truth = load_mesh(directory / "truth.ply");
    scene.degraded = load_mesh(directory / "degraded.ply");
    scene.views = load_views(directory / "views.txt");
    scene.albedo = load_albedo(directory / "albedo.txt");
    scene.material_labels = load_labels(directory / "labels.txt");
    scene.light = load_light(directory / "light.txt");
    return scene;
}

// ---------------------------------------------------------------------------
// Checksums and manifests
// ---------------------------------------------------------------------------

namespace {

std::string digest_hex(EVP_MD_CTX* ctx) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_DigestFinal_ex(ctx, digest, &length) != 1)
        throw std::runtime_error("sha256: digest finalization failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

struct DigestContext {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    ~DigestContext() { EVP_MD_CTX_free(ctx); }
};

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
    DigestContext d;
    if (!d.ctx || EVP_DigestInit_ex(d.ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(d.ctx, data, size) != 1)
        throw std::runtime_error("sha256: digest computation failed");
    return digest_hex(d.ctx);
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in = open_input(path, std::ios::in | std::ios::binary);
    DigestContext d;
    if (!d.ctx || EVP_DigestInit_ex(d.ctx, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest computation failed");
    std::array<char, 65536> buffer;
    while (in) {
        in.read(buffer.data(), buffer.size());
        const std::streamsize got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(d.ctx, buffer.data(), static_cast<size_t>(got)) != 1)
            throw std::runtime_error("sha256: digest computation failed");
    }
    return digest_hex(d.ctx);
}

void write_manifest(const fs::path& directory, const std::vector<fs::path>& files) {
    std::vector<fs::path> sorted = files;
    std::sort(sorted.begin(), sorted.end());
    nlohmann::json entries = nlohmann::json::array();
    for (const fs::path& rel : sorted) {
        const fs::path full = directory / rel;
        entries.push_back({{"path", rel.generic_string()},
                           {"bytes", static_cast<std::uint64_t>(fs::file_size(full))},
                           {"sha256", sha256_file(full)}});
    }
    const nlohmann::json manifest = {{"files", entries}};
    std::ofstream out = open_output(directory / "manifest.json");
    out << manifest.dump(2) << "\n";
    if (!out) fail(directory / "manifest.json", "write failed");
}

}  // namespace irmesh
