// SPDX-License-Identifier: Apache-2.0
#include "trnn/format_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "trnn/atomic_file.hpp"

namespace trnn {
namespace {

constexpr std::array<char, 4> kRingMagic{'T', 'R', 'F', '1'};
constexpr std::array<char, 4> kLayerMagic{'T', 'R', 'L', '1'};
// Guards against reading absurd sizes from a corrupt header.
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

void put_u64(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& is) {
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw FileFormatError("unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void expect_magic(std::istream& is, const std::array<char, 4>& magic) {
    std::array<char, 4> got{};
    if (!is.read(got.data(), 4) || got != magic)
        throw FileFormatError(std::string("bad magic, expected ") + std::string(magic.data(), 4));
}

Index checked(std::uint64_t v, const char* what) {
    if (v == 0 || v > kMaxCount) throw FileFormatError(std::string("implausible ") + what);
    return static_cast<Index>(v);
}

nlohmann::json ring_json(const TR& ring) {
    nlohmann::json cores = nlohmann::json::array();
    for (const auto& c : ring.cores())
        cores.push_back({{"shape", c.shape()},
                         {"data", std::vector<double>(c.data().begin(), c.data().end())}});
    return {{"magic", "TRF1"}, {"cores", cores}};
}

TR ring_of_json(const nlohmann::json& j) {
    if (j.value("magic", "") != "TRF1") throw FileFormatError("JSON ring: magic must be \"TRF1\"");
    std::vector<Tensor> cores;
    for (const auto& c : j.at("cores")) {
        const auto shape = c.at("shape").get<Shape>();
        const auto data = c.at("data").get<std::vector<double>>();
        if (shape.size() != 3) throw FileFormatError("JSON ring: core shape must have 3 entries");
        Tensor::Storage s = Eigen::Map<const Tensor::Storage>(data.data(), static_cast<Index>(data.size()));
        cores.emplace_back(shape, std::move(s));
    }
    return TR(std::move(cores));
}

nlohmann::json parse(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FileFormatError(std::string("invalid JSON: ") + e.what());
    }
}

template <typename F>
auto json_guard(F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw FileFormatError(std::string("malformed JSON document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FileFormatError(e.what());
    }
}

}  // namespace

void write_ring(std::ostream& os, const TR& ring) {
    os.write(kRingMagic.data(), 4);
    put_u64(os, static_cast<std::uint64_t>(ring.order()));
    for (const auto& c : ring.cores()) {
        for (Index d : c.shape()) put_u64(os, static_cast<std::uint64_t>(d));
        for (Index i = 0; i < c.size(); ++i) put_f64(os, c.data()[i]);
    }
}

TR read_ring(std::istream& is) {
    expect_magic(is, kRingMagic);
    const Index d = checked(get_u64(is), "core count");
    std::vector<Tensor> cores;
    for (Index k = 0; k < d; ++k) {
        Shape shape(3);
        for (auto& s : shape) s = checked(get_u64(is), "core dimension");
        if (volume(shape) > static_cast<Index>(kMaxCount)) throw FileFormatError("implausible core size");
        Tensor c(shape);
        for (Index i = 0; i < c.size(); ++i) c.data()[i] = get_f64(is);
        cores.push_back(std::move(c));
    }
    try {
        return TR(std::move(cores));
    } catch (const FormatError& e) {
        throw FileFormatError(e.what());
    }
}

void write_layer(std::ostream& os, const TRL& layer) {
    os.write(kLayerMagic.data(), 4);
    put_u64(os, layer.n());
    put_u64(os, layer.m());
    for (Index v : layer.input_dims()) put_u64(os, static_cast<std::uint64_t>(v));
    for (Index v : layer.output_dims()) put_u64(os, static_cast<std::uint64_t>(v));
    write_ring(os, layer.cores());
}

TRL read_layer(std::istream& is) {
    expect_magic(is, kLayerMagic);
    const Index n = checked(get_u64(is), "input core count");
    const Index m = checked(get_u64(is), "output core count");
    Shape in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(m));
    for (auto& v : in) v = checked(get_u64(is), "input dimension");
    for (auto& v : out) v = checked(get_u64(is), "output dimension");
    auto ring = read_ring(is);
    try {
        return TRL(std::move(in), std::move(out), std::move(ring));
    } catch (const FormatError& e) {
        throw FileFormatError(e.what());
    }
}

std::string ring_to_json(const TR& ring) { return ring_json(ring).dump(); }

TR ring_from_json(const std::string& text) {
    return json_guard([&] { return ring_of_json(parse(text)); });
}

std::string layer_to_json(const TRL& layer) {
    const nlohmann::json j{{"magic", "TRL1"},
                           {"n", layer.n()},
                           {"m", layer.m()},
                           {"input_dims", layer.input_dims()},
                           {"output_dims", layer.output_dims()},
                           {"ring", ring_json(layer.cores())}};
    return j.dump();
}

TRL layer_from_json(const std::string& text) {
    return json_guard([&] {
        const auto j = parse(text);
        if (j.value("magic", "") != "TRL1") throw FileFormatError("JSON layer: magic must be \"TRL1\"");
        auto in = j.at("input_dims").get<Shape>();
        auto out = j.at("output_dims").get<Shape>();
        if (j.at("n").get<std::size_t>() != in.size() || j.at("m").get<std::size_t>() != out.size())
            throw FileFormatError("JSON layer: n/m disagree with the listed dims");
        return TRL(std::move(in), std::move(out), ring_of_json(j.at("ring")));
    });
}

namespace {
bool is_json_path(const std::filesystem::path& p) { return p.extension() == ".json"; }
bool looks_like_json(const std::string& s) {
    const auto pos = s.find_first_not_of(" \t\r\n");
    return pos != std::string::npos && s[pos] == '{';
}
}  // namespace

void save_ring(const std::filesystem::path& path, const TR& ring) {
    if (is_json_path(path)) return write_file_atomic(path, ring_to_json(ring));
    std::ostringstream os;
    write_ring(os, ring);
    write_file_atomic(path, os.str());
}

void save_layer(const std::filesystem::path& path, const TRL& layer) {
    if (is_json_path(path)) return write_file_atomic(path, layer_to_json(layer));
    std::ostringstream os;
    write_layer(os, layer);
    write_file_atomic(path, os.str());
}

TR load_ring(const std::filesystem::path& path) {
    const auto text = read_file(path);
    if (looks_like_json(text)) return ring_from_json(text);
    std::istringstream is(text);
    return read_ring(is);
}

TRL load_layer(const std::filesystem::path& path) {
    const auto text = read_file(path);
    if (looks_like_json(text)) return layer_from_json(text);
    std::istringstream is(text);
    return read_layer(is);
}

}  // namespace trnn
