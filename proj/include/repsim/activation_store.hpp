#ifndef REPSIM_ACTIVATION_STORE_HPP
#define REPSIM_ACTIVATION_STORE_HPP

// Per-layer activation tensors on disk and the manifests that index them.
//
// Tensors use a strict subset of NPY v1.0: little-endian float32 or float64,
// C order, exactly four dimensions (n, h, w, c). Manifests are JSON:
//
//   {"model_id": str, "checkpoint_tag": str, "seed": int,
//    "stimulus_source": str,
//    "layers": [{"name": str, "path": str, "shape": [n, h, w, c]}, ...]}
//
// Layer paths are resolved relative to the manifest's directory.

#include "repsim/error.hpp"
#include "repsim/linalg.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace repsim {

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are read with memcpy and assume a little-endian host");

enum class DType { f32, f64 };

inline const char* dtype_descr(DType d) { return d == DType::f32 ? "<f4" : "<f8"; }

struct TensorShape {
    std::size_t n = 0, h = 0, w = 0, c = 0;

    std::size_t count() const noexcept { return n * h * w * c; }
    std::size_t spatial() const noexcept { return h * w; }
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
               std::to_string(c) + ")";
    }
    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// One layer's activations over n stimuli, C-order (n, h, w, c).
class ActivationTensor {
public:
    using Storage = std::variant<std::vector<float>, std::vector<double>>;

    ActivationTensor(std::string layer_name, TensorShape shape, Storage values)
        : layer_name_(std::move(layer_name)), shape_(shape), values_(std::move(values)) {
        validate();
    }

    const std::string& layer_name() const noexcept { return layer_name_; }
    void set_layer_name(std::string name) { layer_name_ = std::move(name); }
    const TensorShape& shape() const noexcept { return shape_; }
    DType dtype() const noexcept { return values_.index() == 0 ? DType::f32 : DType::f64; }
    const Storage& storage() const noexcept { return values_; }

    double flat(std::size_t i) const {
        return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, values_);
    }
    double at(std::size_t i, std::size_t r, std::size_t s, std::size_t ch) const {
        return flat(((i * shape_.h + r) * shape_.w + s) * shape_.c + ch);
    }

    friend bool operator==(const ActivationTensor&, const ActivationTensor&) = default;

private:
    void validate() const {
        if (shape_.n == 0 || shape_.h == 0 || shape_.w == 0 || shape_.c == 0) {
            throw DataError("shape", "tensor '" + layer_name_ + "' has a zero dimension " +
                                         shape_.str());
        }
        const std::size_t len = std::visit([](const auto& v) { return v.size(); }, values_);
        if (len != shape_.count()) {
            throw DataError("shape", "tensor '" + layer_name_ + "' holds " + std::to_string(len) +
                                         " values but shape " + shape_.str() + " needs " +
                                         std::to_string(shape_.count()));
        }
        std::visit(
            [this](const auto& v) {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (!std::isfinite(v[i])) {
                        throw DataError("nonfinite", "tensor '" + layer_name_ +
                                                         "' has a non-finite value at flat index " +
                                                         std::to_string(i));
                    }
                }
            },
            values_);
    }

    std::string layer_name_;
    TensorShape shape_;
    Storage values_;
};

struct NpyHeader {
    DType dtype = DType::f32;
    TensorShape shape;
    std::size_t data_offset = 0;
};

namespace detail {

inline constexpr std::string_view kNpyMagic{"\x93NUMPY", 6};

// Minimal reader for the Python dict literal in an NPY header.
class NpyDictParser {
public:
    explicit NpyDictParser(std::string_view text) : s_(text) {}

    NpyHeader parse(const std::string& where) {
        where_ = where;
        bool have_descr = false, have_order = false, have_shape = false;
        NpyHeader out;
        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '}') break;
            const std::string key = quoted();
            expect(':');
            if (key == "descr") {
                const std::string descr = quoted();
                if (descr == "<f4") {
                    out.dtype = DType::f32;
                } else if (descr == "<f8") {
                    out.dtype = DType::f64;
                } else if (descr == ">f4" || descr == ">f8") {
                    fail("unsupported byte order '" + descr + "' (only little-endian)");
                } else {
                    fail("unsupported dtype '" + descr + "' (only <f4 and <f8)");
                }
                have_descr = true;
            } else if (key == "fortran_order") {
                const std::string word = bare_word();
                if (word == "True") fail("unsupported layout: fortran_order is True");
                if (word != "False") fail("bad fortran_order value '" + word + "'");
                have_order = true;
            } else if (key == "shape") {
                const auto dims = tuple();
                if (dims.size() != 4) {
                    fail("expected a 4-dimensional shape, got " + std::to_string(dims.size()) +
                         " dimensions");
                }
                out.shape = {dims[0], dims[1], dims[2], dims[3]};
                have_shape = true;
            } else {
                fail("unexpected header key '" + key + "'");
            }
            skip_ws();
            if (peek() == ',') ++pos_;
        }
        if (!have_descr || !have_order || !have_shape) {
            fail("header is missing descr, fortran_order or shape");
        }
        return out;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("format", where_ + ": " + what);
    }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void expect(char ch) {
        skip_ws();
        if (peek() != ch) fail(std::string("malformed header, expected '") + ch + "'");
        ++pos_;
    }
    std::string quoted() {
        skip_ws();
        const char q = peek();
        if (q != '\'' && q != '"') fail("malformed header, expected a quoted string");
        const auto end = s_.find(q, pos_ + 1);
        if (end == std::string_view::npos) fail("malformed header, unterminated string");
        std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
        return out;
    }
    std::string bare_word() {
        skip_ws();
        const auto start = pos_;
        while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }
    std::vector<std::size_t> tuple() {
        expect('(');
        std::vector<std::size_t> dims;
        while (true) {
            skip_ws();
            if (peek() == ')') {
                ++pos_;
                break;
            }
            const auto start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (start == pos_) fail("malformed shape tuple");
            dims.push_back(std::stoull(std::string(s_.substr(start, pos_ - start))));
            skip_ws();
            if (peek() == ',') ++pos_;
        }
        return dims;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::string where_;
};

inline std::string npy_header_text(DType dtype, const TensorShape& shape) {
    std::string dict = std::string("{'descr': '") + dtype_descr(dtype) +
                       "', 'fortran_order': False, 'shape': (" + std::to_string(shape.n) + ", " +
                       std::to_string(shape.h) + ", " + std::to_string(shape.w) + ", " +
                       std::to_string(shape.c) + "), }";
    // magic(6) + version(2) + length(2) + dict + padding + '\n' is a multiple of 64.
    const std::size_t unpadded = 10 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict.push_back('\n');
    return dict;
}

} // namespace detail

/// Parse only the NPY header of `path`; the payload is not read.
inline NpyHeader read_tensor_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file " + path.string());
    const std::string where = path.string();

    std::array<char, 10> pre{};
    in.read(pre.data(), pre.size());
    if (in.gcount() != static_cast<std::streamsize>(pre.size()) ||
        std::string_view(pre.data(), 6) != detail::kNpyMagic) {
        throw DataError("format", where + ": bad magic, not an NPY file");
    }
    if (pre[6] != 1 || pre[7] != 0) {
        throw DataError("format", where + ": unsupported NPY version " + std::to_string(int(pre[6])) +
                                      "." + std::to_string(int(pre[7])) + " (only 1.0)");
    }
    const std::size_t header_len = static_cast<unsigned char>(pre[8]) |
                                   (static_cast<std::size_t>(static_cast<unsigned char>(pre[9])) << 8);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (in.gcount() != static_cast<std::streamsize>(header_len)) {
        throw DataError("format", where + ": truncated header");
    }
    NpyHeader out = detail::NpyDictParser(header).parse(where);
    out.data_offset = 10 + header_len;
    return out;
}

/// Load a tensor file. The layer name defaults to the file stem.
inline ActivationTensor read_tensor(const std::filesystem::path& path) {
    const NpyHeader header = read_tensor_header(path);
    const std::string where = path.string();
    const TensorShape& shape = header.shape;
    if (shape.count() == 0) throw DataError("shape", where + ": shape " + shape.str() + " is empty");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file " + where);
    in.seekg(static_cast<std::streamoff>(header.data_offset));
    const std::size_t elem = header.dtype == DType::f32 ? 4 : 8;
    const std::size_t expected = shape.count() * elem;

    std::vector<char> bytes(expected);
    in.read(bytes.data(), static_cast<std::streamsize>(expected));
    const auto got = static_cast<std::size_t>(in.gcount());
    const bool trailing = got == expected && in.peek() != std::char_traits<char>::eof();
    if (got != expected || trailing) {
        throw DataError("shape", where + ": payload length does not match shape " + shape.str() +
                                     " (" + std::to_string(expected) + " bytes expected)");
    }

    ActivationTensor::Storage storage;
    if (header.dtype == DType::f32) {
        std::vector<float> v(shape.count());
        std::memcpy(v.data(), bytes.data(), expected);
        storage = std::move(v);
    } else {
        std::vector<double> v(shape.count());
        std::memcpy(v.data(), bytes.data(), expected);
        storage = std::move(v);
    }
    try {
        return ActivationTensor(path.stem().string(), shape, std::move(storage));
    } catch (const DataError& e) {
        throw DataError(e.category(), where + ": " + e.what());
    }
}

inline void write_tensor(const ActivationTensor& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    const std::string dict = detail::npy_header_text(t.dtype(), t.shape());
    out.write(detail::kNpyMagic.data(), static_cast<std::streamsize>(detail::kNpyMagic.size()));
    const char version[2] = {1, 0};
    out.write(version, 2);
    const char len[2] = {static_cast<char>(dict.size() & 0xff), static_cast<char>(dict.size() >> 8)};
    out.write(len, 2);
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
    std::visit(
        [&out](const auto& v) {
            out.write(reinterpret_cast<const char*>(v.data()),
                      static_cast<std::streamsize>(v.size() * sizeof(v[0])));
        },
        t.storage());
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

/// (n·h·w) × c matrix; row i·h·w + r·w + s holds stimulus i at spatial (r, s).
/// C-order storage already has this layout, so values are copied in place.
inline Matrix flatten(const ActivationTensor& t) {
    const TensorShape& s = t.shape();
    std::vector<double> values(s.count());
    std::visit([&](const auto& v) { std::copy(v.begin(), v.end(), values.begin()); }, t.storage());
    return Matrix(s.n * s.h * s.w, s.c, std::move(values));
}

struct LayerEntry {
    std::string name;
    std::filesystem::path path; // resolved against the manifest directory
    TensorShape shape;
};

struct Manifest {
    std::string model_id;
    std::string checkpoint_tag;
    std::string stimulus_source;
    std::int64_t seed = 0;
    std::vector<LayerEntry> layers;

    /// Identity used to key per-side random streams.
    std::string identity() const { return model_id + "\x1f" + checkpoint_tag; }
};

inline Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir,
                               const std::string& where) {
    Manifest m;
    try {
        m.model_id = j.at("model_id").get<std::string>();
        m.checkpoint_tag = j.at("checkpoint_tag").get<std::string>();
        m.seed = j.at("seed").get<std::int64_t>();
        m.stimulus_source = j.at("stimulus_source").get<std::string>();
        std::set<std::string> seen;
        for (const auto& layer : j.at("layers")) {
            LayerEntry e;
            e.name = layer.at("name").get<std::string>();
            if (!seen.insert(e.name).second) {
                throw DataError("manifest", where + ": duplicate layer name '" + e.name + "'");
            }
            const auto path = std::filesystem::path(layer.at("path").get<std::string>());
            e.path = path.is_absolute() ? path : base_dir / path;
            const auto dims = layer.at("shape").get<std::vector<std::int64_t>>();
            if (dims.size() != 4) {
                throw DataError("manifest", where + ": layer '" + e.name +
                                                "' shape must have 4 entries");
            }
            for (auto d : dims) {
                if (d < 1) {
                    throw DataError("manifest", where + ": layer '" + e.name +
                                                    "' has a non-positive dimension");
                }
            }
            e.shape = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                       static_cast<std::size_t>(dims[2]), static_cast<std::size_t>(dims[3])};
            m.layers.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest", where + ": " + e.what());
    }
    if (m.layers.empty()) throw DataError("manifest", where + ": no layers listed");
    return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest", path.string() + ": " + e.what());
    }
    return parse_manifest(j, path.parent_path(), path.string());
}

/// Writes paths relative to the manifest directory when they live under it.
inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["model_id"] = m.model_id;
    j["checkpoint_tag"] = m.checkpoint_tag;
    j["seed"] = m.seed;
    j["stimulus_source"] = m.stimulus_source;
    j["layers"] = nlohmann::ordered_json::array();
    const auto base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    for (const auto& e : m.layers) {
        std::string stored = e.path.generic_string();
        if (e.path.is_absolute()) {
            const auto rel = e.path.lexically_relative(std::filesystem::absolute(base));
            if (!rel.empty() && *rel.begin() != "..") stored = rel.generic_string();
        }
        nlohmann::ordered_json layer;
        layer["name"] = e.name;
        layer["path"] = stored;
        layer["shape"] = {e.shape.n, e.shape.h, e.shape.w, e.shape.c};
        j["layers"].push_back(std::move(layer));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

/// Header-only check that a layer file agrees with its declared shape.
inline NpyHeader check_layer(const LayerEntry& e) {
    NpyHeader header;
    try {
        header = read_tensor_header(e.path);
    } catch (const Error& err) {
        throw DataError(err.category(), "layer '" + e.name + "': " + err.what());
    }
    if (!(header.shape == e.shape)) {
        throw DataError("shape", "layer '" + e.name + "': file shape " + header.shape.str() +
                                     " disagrees with declared shape " + e.shape.str());
    }
    return header;
}

/// Load a manifest layer, rejecting any disagreement with its declared shape.
inline ActivationTensor load_layer(const LayerEntry& e) {
    check_layer(e);
    try {
        ActivationTensor t = read_tensor(e.path);
        t.set_layer_name(e.name);
        return t;
    } catch (const Error& err) {
        throw DataError(err.category(), "layer '" + e.name + "': " + err.what());
    }
}

} // namespace repsim

#endif // REPSIM_ACTIVATION_STORE_HPP
