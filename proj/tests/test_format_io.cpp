// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "trnn/atomic_file.hpp"
#include "trnn/format_io.hpp"

using namespace trnn;

namespace {

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "trnn_format_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

bool same_ring(const TR& a, const TR& b) {
    if (a.order() != b.order()) return false;
    for (Index k = 0; k < a.order(); ++k)
        if (a.core(k).shape() != b.core(k).shape() || a.core(k).data() != b.core(k).data()) return false;
    return true;
}

}  // namespace

TEST_CASE("binary ring layout is byte exact") {
    Tensor c({1, 2, 1}, (Tensor::Storage(2) << 1.0, -2.5).finished());
    std::ostringstream os;
    write_ring(os, TR({c}));
    const std::string bytes = os.str();
    REQUIRE(bytes.size() == 4 + 8 + 3 * 8 + 2 * 8);
    CHECK(bytes.substr(0, 4) == "TRF1");
    auto u64_at = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(i)]);
        return v;
    };
    CHECK(u64_at(4) == 1);
    CHECK(u64_at(12) == 1);
    CHECK(u64_at(20) == 2);
    CHECK(u64_at(28) == 1);
    CHECK(u64_at(36) == std::bit_cast<std::uint64_t>(1.0));
    CHECK(u64_at(44) == std::bit_cast<std::uint64_t>(-2.5));
}

TEST_CASE("ring and layer round trips are bit exact") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto layer = TRL::random({2, 3}, {4, 2}, {3, 1, 2, 2}, seed);
        std::stringstream ss;
        write_layer(ss, layer);
        const auto back = read_layer(ss);
        CHECK(back.input_dims() == layer.input_dims());
        CHECK(back.output_dims() == layer.output_dims());
        CHECK(same_ring(back.cores(), layer.cores()));

        CHECK(same_ring(ring_from_json(ring_to_json(layer.cores())), layer.cores()));
        const auto via_json = layer_from_json(layer_to_json(layer));
        CHECK(same_ring(via_json.cores(), layer.cores()));
        CHECK(via_json.input_dims() == layer.input_dims());
    }
}

TEST_CASE("files: extension picks the variant, content picks the reader") {
    const auto dir = scratch_dir();
    const auto ring = random_tr({3, 3, 3}, {2, 2, 2}, 4);
    save_ring(dir / "ring.trf", ring);
    save_ring(dir / "ring.json", ring);
    CHECK(read_file(dir / "ring.trf").substr(0, 4) == "TRF1");
    CHECK(read_file(dir / "ring.json").front() == '{');
    CHECK(same_ring(load_ring(dir / "ring.trf"), ring));
    CHECK(same_ring(load_ring(dir / "ring.json"), ring));

    const auto layer = TRL::random({3, 3}, {3}, {2, 2, 2}, 1);
    save_layer(dir / "layer.trl", layer);
    CHECK(same_ring(load_layer(dir / "layer.trl").cores(), layer.cores()));
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        CHECK(entry.path().string().find(".tmp.") == std::string::npos);
}

TEST_CASE("corrupt input is rejected") {
    std::istringstream bad_magic("XXXX");
    CHECK_THROWS_AS(read_ring(bad_magic), FileFormatError);

    std::ostringstream os;
    write_ring(os, random_tr({2, 2}, {2, 2}, 0));
    std::istringstream truncated(os.str().substr(0, os.str().size() - 3));
    CHECK_THROWS_AS(read_ring(truncated), FileFormatError);

    CHECK_THROWS_AS(ring_from_json("{\"magic\":\"TRF1\",\"cores\":[{\"shape\":[2,2,3],\"data\":[]}]}"),
                    FileFormatError);
    CHECK_THROWS_AS(ring_from_json("{\"magic\":\"TRF1\",\"cores\":[{\"shape\":[1,2,2],\"data\":[1,2,3,4]}]}"),
                    FileFormatError);
    CHECK_THROWS_AS(ring_from_json("not json"), FileFormatError);
    CHECK_THROWS_AS(layer_from_json(ring_to_json(random_tr({2}, {1}, 0))), FileFormatError);
}
