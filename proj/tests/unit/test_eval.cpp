#include "dctdrift/csv.h"
#include "dctdrift/error.h"
#include "dctdrift/eval.h"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace dctdrift;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("dctdrift_eval_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<EvalRecord> records_with_mse(const std::vector<double>& m)
{
    std::vector<EvalRecord> out;
    for (std::size_t i = 0; i < m.size(); ++i) out.push_back({"e" + std::to_string(i), "pg-5", m[i], 0.5});
    return out;
}

} // namespace

TEST_CASE("mse examples")
{
    const std::vector<double> a{1.0, 2.0, 3.0};
    CHECK(mse(a, a) == 0.0);
    CHECK(mse(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
    CHECK(mse(a, std::vector<double>{2, 2, 5}) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(std::abs(mse(a, std::vector<double>{2, 2, 5}) - 1.6667) < 1e-4);
    CHECK_THROWS_AS(mse(a, std::vector<double>{1, 2}), ShapeMismatch);
}

TEST_CASE("cosine similarity examples")
{
    const std::vector<double> a{0.3, -1.0, 2.5};
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine_similarity(a, std::vector<double>{-0.3, 1.0, -2.5}) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(cosine_similarity(a, std::vector<double>{0, 0, 0}), InvalidParameter);
    CHECK_THROWS_AS(cosine_similarity(a, std::vector<double>{1, 2}), ShapeMismatch);
}

TEST_CASE("metric symmetry and scale invariance")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(40), b(40);
        for (double& v : a) v = n(rng);
        for (double& v : b) v = n(rng);
        CHECK(mse(a, b) == mse(b, a));
        CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-15));
        const double base = cosine_similarity(a, b);
        for (double alpha : {2.5, -0.1}) {
            for (double beta : {0.3, -7.0}) {
                auto sa = a, sb = b;
                for (double& v : sa) v *= alpha;
                for (double& v : sb) v *= beta;
                const double sign = alpha * beta > 0 ? 1.0 : -1.0;
                CHECK(std::abs(cosine_similarity(sa, sb) - sign * base) < 1e-12);
            }
        }
    }
}

TEST_CASE("aggregate examples")
{
    const auto single = aggregate({{"x", "tcnn-dct", 0.7, 0.9}});
    REQUIRE(single.size() == 1);
    const auto& s = single.at("tcnn-dct");
    CHECK(s.count == 1);
    CHECK(s.mse_avg == 0.7);
    CHECK(s.mse_median == 0.7);
    CHECK(s.cos_avg == 0.9);
    CHECK(s.cos_median == 0.9);

    const auto four = aggregate(records_with_mse({1, 2, 3, 10})).at("pg-5");
    CHECK(four.mse_avg == 4.0);
    CHECK(four.mse_median == 2.5);

    const auto constant = aggregate(records_with_mse({0.1, 0.1, 0.1, 0.1, 0.1})).at("pg-5");
    CHECK(std::abs(constant.mse_avg - 0.1) < 1e-15);
    CHECK(constant.cos_avg == 0.5);

    CHECK_THROWS_AS(aggregate({}), InvalidParameter);
}

TEST_CASE("aggregate groups by method and ignores record order")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 3.0), c(-1.0, 1.0);
    std::vector<EvalRecord> recs;
    for (int i = 0; i < 37; ++i) {
        for (const char* m : {"pg-5", "pg-12", "tcnn-dct"}) recs.push_back({std::to_string(i), m, u(rng), c(rng)});
    }
    const auto ref = aggregate(recs);
    CHECK(ref.size() == 3);
    CHECK(ref.at("pg-12").count == 37);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(recs.begin(), recs.end(), rng);
        const auto again = aggregate(recs);
        for (const auto& [m, s] : ref) {
            CHECK(again.at(m).mse_avg == s.mse_avg);
            CHECK(again.at(m).mse_median == s.mse_median);
            CHECK(again.at(m).cos_avg == s.cos_avg);
            CHECK(again.at(m).cos_median == s.cos_median);
        }
    }
}

TEST_CASE("median convention")
{
    CHECK(median({3.0}) == 3.0);
    CHECK(median({4.0, 1.0, 3.0}) == 3.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS_AS(median({}), InvalidParameter);
}

TEST_CASE("total variation")
{
    CHECK(total_variation(std::vector<double>{}) == 0.0);
    CHECK(total_variation(std::vector<double>{5.0}) == 0.0);
    CHECK(total_variation(std::vector<double>{0.0, 1.0, -1.0, -1.0}) == 3.0);
}

TEST_CASE("table layout orders bandwidths then the network")
{
    std::vector<EvalRecord> recs{{"a", "tcnn-dct", 0.05, 0.97}, {"a", "pg-16", 1.0, 0.8}, {"a", "pg-5", 1.7, 0.72},
                                 {"a", "pg-9", 1.1, 0.85}};
    const auto summary = aggregate(recs);
    const auto order = ordered_methods(summary);
    CHECK(order == std::vector<std::string>{"pg-5", "pg-9", "pg-16", "tcnn-dct"});

    const std::string csv = format_table_csv(summary);
    const CsvTable t = parse_csv(csv);
    CHECK(t.header == std::vector<std::string>{"metric", "pg-5", "pg-9", "pg-16", "tcnn-dct"});
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0][0] == "MSE (avg.)");
    CHECK(t.rows[3][0] == "Cos sim (median)");
    CHECK(t.number(0, 4) == 0.05);
    CHECK(t.number(2, 1) == 0.72);

    const std::string text = format_table_text(summary);
    std::istringstream is(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(is, line)) lines.push_back(line);
    REQUIRE(lines.size() == 5);
    for (const auto& l : lines) CHECK(l.size() == lines[0].size());
    CHECK(lines[0].find("PG B=5") != std::string::npos);
    CHECK(lines[0].find("TCNN-DCT") > lines[0].find("PG B=16"));
    CHECK(lines[1].find("0.0500") != std::string::npos);
}

TEST_CASE("records csv round trip")
{
    const fs::path dir = scratch_dir("records");
    const std::vector<EvalRecord> recs{{"ex_00001", "pg-7", 0.1234567890123, 0.987654321}, {"ex_00002", "tcnn-dct", 2e-9, -0.25}};
    write_records_csv(dir / "r.csv", recs);
    const auto back = read_records_csv(dir / "r.csv");
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].example_id == recs[i].example_id);
        CHECK(back[i].method == recs[i].method);
        CHECK(back[i].mse == recs[i].mse);
        CHECK(back[i].cosine_sim == recs[i].cosine_sim);
    }
}

TEST_CASE("overlay csv and svg")
{
    const fs::path dir = scratch_dir("overlay");
    std::vector<double> o(300), d(300), p(300);
    for (std::size_t i = 0; i < 300; ++i) {
        o[i] = std::sin(0.05 * i) + 0.01 * i;
        d[i] = 0.01 * i + 1.0 / 3.0;
        p[i] = 0.011 * i - 2.0 / 7.0;
    }
    const TimeSeries obs(o, 0.5, 2.0);
    emit_overlay(obs, TimeSeries(d, 0.5, 2.0), TimeSeries(p, 0.5, 2.0), dir / "ov");

    const CsvTable t = read_csv(dir / "ov.csv");
    CHECK(t.header == std::vector<std::string>{"t", "observed", "tcnn", "pg"});
    REQUIRE(t.rows.size() == 300);
    for (std::size_t i = 0; i < 300; ++i) {
        CHECK(std::abs(t.number(i, 0) - obs.time_at(i)) < 1e-9);
        CHECK(std::abs(t.number(i, 1) - o[i]) < 1e-9);
        CHECK(std::abs(t.number(i, 2) - d[i]) < 1e-9);
        CHECK(std::abs(t.number(i, 3) - p[i]) < 1e-9);
    }

    boost::property_tree::ptree tree;
    CHECK_NOTHROW(boost::property_tree::read_xml((dir / "ov.svg").string(), tree));
    const auto& svg = tree.get_child("svg");
    std::size_t lines = 0;
    for (const auto& child : svg) {
        if (child.first == "polyline") ++lines;
    }
    CHECK(lines == 3);

    emit_overlay(obs, TimeSeries(d, 0.5, 2.0), std::nullopt, dir / "nopg");
    CHECK(std::isnan(read_csv(dir / "nopg.csv").number(0, 3)));
    CHECK_THROWS_AS(emit_overlay(obs, TimeSeries(std::vector<double>(3, 0.0)), std::nullopt, dir / "bad"),
                    ShapeMismatch);
}
