#include "strsparse/checkpoint.hpp"

#include <filesystem>

#include "doctest.h"
#include "strsparse/rng.hpp"
#include "testutil.hpp"

using namespace strs;
using test::random_tensor;

TEST_CASE("tensor json round trip") {
    Rng rng(91);
    const Tensor t = random_tensor({3, 4, 2}, rng);
    const Tensor back = tensor_from_json(tensor_to_json(t));
    REQUIRE(back.same_shape(t));
    for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
    CHECK_THROWS(tensor_from_json(nlohmann::json{{"shape", {2, 2}}}));
}

TEST_CASE("checkpoint save/load restores the exact model state") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "strsparse_test_ckpt";
    fs::create_directories(dir);
    const std::string path = (dir / "model.json").string();

    Rng rng(92);
    StrOptions opt;
    opt.s_init = -2.0;
    Sequential model = make_mlp(6, {8}, 3, opt, rng);
    // move thresholds somewhere non-trivial
    model.str_layers()[0]->str_param().s[0] = -1.2;
    model.str_layers()[1]->str_param().s[0] = -0.4;
    save_checkpoint(model, path);

    const Tensor x = random_tensor({4, 6}, rng);
    const Tensor want = model.forward(x);

    Rng rng2(4711);  // different init; load must overwrite it
    Sequential fresh = make_mlp(6, {8}, 3, StrOptions{}, rng2);
    load_checkpoint(fresh, path);
    const Tensor got = fresh.forward(x);
    for (std::int64_t i = 0; i < want.numel(); ++i) CHECK(got[i] == want[i]);
    CHECK(fresh.str_layers()[0]->str_param().s[0] == -1.2);

    // inspect summary mentions every layer
    const std::string summary = checkpoint_summary(path);
    CHECK(summary.find("fc1") != std::string::npos);
    CHECK(summary.find("fc2") != std::string::npos);

    // a model with an extra layer cannot load; the missing layer is named
    Rng rng3(93);
    Sequential other = make_mlp(6, {8, 3}, 3, StrOptions{}, rng3);
    CHECK_THROWS_WITH_AS(load_checkpoint(other, path), doctest::Contains("fc3"),
                         std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint(model, (dir / "missing.json").string()),
                    std::runtime_error);
}

TEST_CASE("checkpoint shape mismatches are rejected") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "strsparse_test_ckpt";
    fs::create_directories(dir);
    const std::string path = (dir / "mlp_small.json").string();
    Rng rng(94);
    Sequential small = make_mlp(4, {5}, 2, StrOptions{}, rng);
    save_checkpoint(small, path);
    Rng rng2(95);
    Sequential big = make_mlp(4, {9}, 2, StrOptions{}, rng2);  // same names, other shapes
    CHECK_THROWS_WITH_AS(load_checkpoint(big, path), doctest::Contains("shape"),
                         std::runtime_error);
}
