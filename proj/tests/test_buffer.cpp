#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "pcl/buffer.hpp"
#include "pcl/errors.hpp"
#include "test_util.hpp"

using namespace pcl;

namespace {

Sample make_sample(double value, int task = 0, long index = 0) {
    return Sample{{value}, {1.0, 0.0}, task, index};
}

}  // namespace

TEST_CASE("maybe_insert: fill phase stores everything") {
    ReservoirBuffer buf(2);
    Rng rng = Rng::seeded(1);
    buf.maybe_insert(make_sample(1.0), rng);
    buf.maybe_insert(make_sample(2.0), rng);
    CHECK(buf.size() == 2);
    CHECK(buf.attempts() == 2);
    CHECK(buf.items()[0].features[0] == 1.0);
    CHECK(buf.items()[1].features[0] == 2.0);
}

TEST_CASE("maybe_insert: attempts counter tracks every call") {
    ReservoirBuffer buf(1);
    Rng rng = Rng::seeded(2);
    for (int i = 0; i < 17; ++i) buf.maybe_insert(make_sample(i), rng);
    CHECK(buf.attempts() == 17);
    CHECK(buf.size() == 1);
}

// Vitter's law: after streaming n items through a capacity-1 reservoir, each
// item is resident with probability 1/n. Chi-square uniformity at alpha=0.01.
TEST_CASE("maybe_insert: capacity 1 over 5 items follows the 1/n law") {
    const int n = 5;
    const long trials = 100000;
    std::vector<long> counts(n, 0);
    Rng base = Rng::seeded(404);
    for (long t = 0; t < trials; ++t) {
        Rng rng = base.fork(t);
        ReservoirBuffer buf(1);
        for (int i = 0; i < n; ++i) buf.maybe_insert(make_sample(i), rng);
        ++counts[static_cast<int>(buf.items()[0].features[0])];
    }
    CHECK(testutil::inclusion_chi_square(counts, trials, 1) < testutil::kChi2_99_dof4);
}

TEST_CASE("maybe_insert: capacity 2 over 8 items is uniform over items") {
    const int n = 8;
    const long trials = 100000;
    std::vector<long> counts(n, 0);
    Rng base = Rng::seeded(505);
    for (long t = 0; t < trials; ++t) {
        Rng rng = base.fork(t);
        ReservoirBuffer buf(2);
        for (int i = 0; i < n; ++i) buf.maybe_insert(make_sample(i), rng);
        for (const auto& s : buf.items()) ++counts[static_cast<int>(s.features[0])];
    }
    CHECK(testutil::inclusion_chi_square(counts, trials, 2) < testutil::kChi2_99_dof7);
}

TEST_CASE("maybe_insert: capacity respected and contents deterministic under seed") {
    auto run_once = [] {
        ReservoirBuffer buf(16);
        Rng rng = Rng::seeded(99);
        for (int i = 0; i < 500; ++i) buf.maybe_insert(make_sample(i, i / 100, i), rng);
        return buf;
    };
    const auto a = run_once();
    const auto b = run_once();
    CHECK(a.size() == 16);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.items()[i].features == b.items()[i].features);
        CHECK(a.items()[i].stream_index == b.items()[i].stream_index);
    }
}

TEST_CASE("filter_selection: argmax, argmin, IQR ranks, none") {
    const std::vector<double> losses = {0.1, 0.9, 0.5};
    CHECK(filter_selection(BufferFilter::MaxLoss, losses) == std::vector<std::size_t>{1});
    CHECK(filter_selection(BufferFilter::MinLoss, losses) == std::vector<std::size_t>{0});
    CHECK(filter_selection(BufferFilter::None, losses) ==
          std::vector<std::size_t>{0, 1, 2});

    // 8 distinct losses: ranks 3..6 (1-based) survive the IQR filter.
    const std::vector<double> eight = {0.8, 0.1, 0.5, 0.9, 0.3, 0.6, 0.2, 0.4};
    const auto kept = filter_selection(BufferFilter::MiddleLoss, eight);
    // Sorted losses: 0.1 0.2 0.3 0.4 0.5 0.6 0.8 0.9 -> keep 0.3 0.4 0.5 0.6.
    const std::set<std::size_t> expect = {4, 7, 2, 5};
    CHECK(std::set<std::size_t>(kept.begin(), kept.end()) == expect);
}

TEST_CASE("filtered_insert: max filter offers only the argmax row") {
    ReservoirBuffer buf(8, BufferFilter::MaxLoss);
    Rng rng = Rng::seeded(3);
    buf.filtered_insert({make_sample(1.0), make_sample(2.0), make_sample(3.0)},
                        {0.1, 0.9, 0.5}, rng);
    CHECK(buf.size() == 1);
    CHECK(buf.items()[0].features[0] == 2.0);
    CHECK(buf.attempts() == 1);
}

TEST_CASE("filtered_insert: empty batch is a no-op") {
    ReservoirBuffer buf(4, BufferFilter::MiddleLoss);
    Rng rng = Rng::seeded(4);
    buf.filtered_insert({}, {}, rng);
    CHECK(buf.size() == 0);
    CHECK(buf.attempts() == 0);
}

TEST_CASE("sample_batch: single item repeats; full draw is a permutation") {
    Rng rng = Rng::seeded(5);
    ReservoirBuffer buf(4);
    buf.maybe_insert(make_sample(7.0), rng);
    auto [x1, y1] = buf.sample_batch(3, rng);
    CHECK(x1.rows == 3);
    for (int r = 0; r < 3; ++r) CHECK(x1(r, 0) == 7.0);

    buf.maybe_insert(make_sample(8.0), rng);
    buf.maybe_insert(make_sample(9.0), rng);
    auto [x2, y2] = buf.sample_batch(3, rng);
    std::set<double> seen(x2.data.begin(), x2.data.end());
    CHECK(seen == std::set<double>{7.0, 8.0, 9.0});
}

TEST_CASE("sample_batch: empty buffer throws, draw frequencies uniform") {
    ReservoirBuffer empty(2);
    Rng rng = Rng::seeded(6);
    CHECK_THROWS_AS(empty.sample_batch(1, rng), param_error);

    ReservoirBuffer buf(4);
    for (int i = 0; i < 4; ++i) buf.maybe_insert(make_sample(i), rng);
    std::vector<long> counts(4, 0);
    const long draws = 10000;
    for (long t = 0; t < draws; ++t) {
        auto [x, y] = buf.sample_batch(1, rng);
        ++counts[static_cast<int>(x(0, 0))];
    }
    // Multinomial: each count within 4 sigma of draws/4.
    const double expected = draws / 4.0;
    const double sd = std::sqrt(draws * 0.25 * 0.75);
    for (long c : counts) CHECK(std::abs(c - expected) < 4.0 * sd);
}

TEST_CASE("snapshot: JSON lines round out provenance fields") {
    ReservoirBuffer buf(2);
    Rng rng = Rng::seeded(7);
    buf.maybe_insert(Sample{{1.5, -0.5}, {0.0, 1.0}, 3, 42}, rng);
    std::ostringstream out;
    buf.write_snapshot(out);
    const std::string line = out.str();
    CHECK(line.find("\"features\":[1.5,-0.5]") != std::string::npos);
    CHECK(line.find("\"task_id\":3") != std::string::npos);
    CHECK(line.find("\"stream_index\":42") != std::string::npos);
    CHECK(line.find("\"label\":[0.0,1.0]") != std::string::npos);
}

TEST_CASE("samples are not mutated after insertion") {
    ReservoirBuffer buf(2);
    Rng rng = Rng::seeded(8);
    Sample s = make_sample(5.0, 1, 10);
    buf.maybe_insert(s, rng);
    s.features[0] = -1.0;  // caller's copy changes, stored sample must not
    CHECK(buf.items()[0].features[0] == 5.0);
}
