#include "angcn/io.hpp"
#include "angcn/rng.hpp"

#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <limits>

using namespace angcn;

TEST(FormatDouble, RoundTripsExactly) {
    Rng rng = make_rng(1, "t");
    std::uniform_real_distribution<double> d(-1e3, 1e3);
    std::vector<double> xs{0.0, -0.0, 1.0 / 3.0, std::numeric_limits<double>::min(), std::numeric_limits<double>::max(),
                           std::numeric_limits<double>::denorm_min(), 0.1, 1e-300};
    for (int i = 0; i < 1000; ++i) xs.push_back(d(rng) * std::pow(10.0, (i % 40) - 20));
    for (double x : xs) EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x) << format_double(x);
}

TEST(Checkpoint, BitExactAndStable) {
    testing_support::TempDir dir;
    Rng rng = make_rng(2, "t");
    std::normal_distribution<double> d(0.0, 1.0);
    Checkpoint ck;
    Matrix a(3, 4), b(1, 7);
    for (Index k = 0; k < a.size(); ++k) a.data()[k] = d(rng) * 1e-7;
    for (Index k = 0; k < b.size(); ++k) b.data()[k] = d(rng) * 1e5;
    ck.params["a"] = a;
    ck.params["b"] = b;
    ck.meta = {{"model", "x"}, {"n", 3}, {"rate", 0.1}};
    write_checkpoint(dir / "ck.json", ck);
    const Checkpoint back = read_checkpoint(dir / "ck.json");
    EXPECT_EQ(checkpoint_param(back, "a"), a);
    EXPECT_EQ(checkpoint_param(back, "b"), b);
    EXPECT_EQ(back.meta, ck.meta);
    EXPECT_EQ(checkpoint_to_string(back), read_text(dir / "ck.json"));
    EXPECT_THROW(checkpoint_param(back, "c"), std::invalid_argument);
}

TEST(Checkpoint, Rejections) {
    Checkpoint ck;
    ck.params["a"] = Matrix::Zero(1, 1);
    ck.meta["a"] = 1;
    EXPECT_THROW(checkpoint_to_string(ck), std::invalid_argument);
    Checkpoint nf;
    nf.params["a"] = Matrix::Constant(1, 1, std::nan(""));
    EXPECT_THROW(checkpoint_to_string(nf), std::invalid_argument);
    EXPECT_THROW(checkpoint_from_json(json::parse(R"({"w": {"rows": 2, "cols": 2, "data": [1, 2, 3]}})")),
                 std::invalid_argument);
    EXPECT_THROW(checkpoint_from_json(json::array()), std::invalid_argument);
}

TEST(Files, MissingAndMalformed) {
    testing_support::TempDir dir;
    EXPECT_THROW(read_text(dir / "nope.txt"), std::invalid_argument);
    write_text(dir / "sub" / "bad.json", "[1,");
    EXPECT_THROW(read_json(dir / "sub" / "bad.json"), ParseError);
}

TEST(Tables, CsvAndJsonl) {
    CsvTable t;
    t.header = {"a", "b"};
    t.add_row({"1", "2"});
    EXPECT_THROW(t.add_row({"1"}), std::invalid_argument);
    EXPECT_EQ(t.str(), "a,b\n1,2\n");
    EXPECT_EQ(to_jsonl({json{{"x", 1}}, json{{"y", 2}}}), "{\"x\":1}\n{\"y\":2}\n");
}
