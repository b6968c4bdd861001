#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "dope/dataset_io.hpp"
#include "dope/policy.hpp"
#include "dope/rng.hpp"
#include "dope/types.hpp"

using namespace dope;

namespace {

OfflineDataset make_dataset(int n, int obs_dim = 2, int reward_dim = 1, bool with_steps = true,
                            std::uint64_t seed = 7) {
    RngStream rng(seed);
    std::vector<TransitionTuple> tuples;
    for (int i = 0; i < n; ++i) {
        TransitionTuple t;
        t.x = rng.normal_vector(obs_dim);
        t.action = static_cast<int>(rng.uniform_index(2));
        t.reward = rng.normal_vector(reward_dim);
        t.x_next = rng.normal_vector(obs_dim);
        if (with_steps) t.step = 1 + static_cast<int>(i % 3);
        tuples.push_back(std::move(t));
    }
    DatasetMeta meta;
    meta.env_id = "test";
    meta.obs_dim = obs_dim;
    meta.reward_dim = reward_dim;
    meta.num_actions = 2;
    if (with_steps) meta.horizon = 3;
    return OfflineDataset(std::move(tuples), std::move(meta));
}

// Multiset signature of a dataset for exact partition checks.
std::multiset<std::uint64_t> tuple_signatures(const OfflineDataset& data) {
    std::multiset<std::uint64_t> sigs;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& t = data[i];
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](double v) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            h ^= bits;
            h *= 1099511628211ULL;
        };
        for (Eigen::Index j = 0; j < t.x.size(); ++j)
            mix(t.x[j]);
        mix(t.action);
        for (Eigen::Index j = 0; j < t.reward.size(); ++j)
            mix(t.reward[j]);
        sigs.insert(h);
    }
    return sigs;
}

} // namespace

TEST_CASE("rng determinism and substreams") {
    RngStream a(42), b(42);
    for (int i = 0; i < 1000; ++i)
        CHECK(a.next_u64() == b.next_u64());

    RngStream parent(9);
    parent.uniform(); // consuming the parent must not change derivation
    RngStream c1 = parent.substream("targets");
    RngStream c2 = RngStream(9).substream("targets");
    CHECK(c1.next_u64() == c2.next_u64());
    RngStream other = parent.substream("fit");
    CHECK(RngStream(9).substream("targets").next_u64() != other.next_u64());
}

TEST_CASE("rng uniform_index is unbiased enough and in range") {
    RngStream rng(3);
    std::map<std::size_t, int> counts;
    const int n = 60000;
    for (int i = 0; i < n; ++i)
        counts[rng.uniform_index(3)]++;
    for (auto& [k, c] : counts) {
        CHECK(k < 3);
        CHECK(std::abs(c / static_cast<double>(n) - 1.0 / 3.0) < 0.01);
    }
}

TEST_CASE("rng normal moments") {
    RngStream rng(11);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("split_dataset: exact division") {
    auto data = make_dataset(20);
    RngStream rng(1);
    auto parts = split_dataset(data, 4, rng);
    REQUIRE(parts.size() == 4);
    for (const auto& p : parts)
        CHECK(p.size() == 5);

    auto whole = tuple_signatures(data);
    std::multiset<std::uint64_t> merged;
    for (const auto& p : parts) {
        auto sigs = tuple_signatures(p);
        merged.insert(sigs.begin(), sigs.end());
    }
    CHECK(merged == whole);
}

TEST_CASE("split_dataset: k = 1 is the identity as a multiset") {
    auto data = make_dataset(20);
    RngStream rng(2);
    auto parts = split_dataset(data, 1, rng);
    REQUIRE(parts.size() == 1);
    CHECK(tuple_signatures(parts[0]) == tuple_signatures(data));
}

TEST_CASE("split_dataset: uneven split sizes differ by at most one") {
    auto data = make_dataset(10);
    RngStream rng(3);
    auto parts = split_dataset(data, 3, rng);
    std::multiset<std::size_t> sizes;
    for (const auto& p : parts)
        sizes.insert(p.size());
    CHECK(sizes == std::multiset<std::size_t>{3, 3, 4});

    std::multiset<std::uint64_t> merged;
    for (const auto& p : parts) {
        auto sigs = tuple_signatures(p);
        merged.insert(sigs.begin(), sigs.end());
    }
    CHECK(merged == tuple_signatures(data));
}

TEST_CASE("split_dataset rejects invalid k") {
    auto data = make_dataset(5);
    RngStream rng(4);
    CHECK_THROWS_AS(split_dataset(data, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(data, 6, rng), std::invalid_argument);
}

TEST_CASE("split partition property on random sizes") {
    RngStream seeds(77);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(seeds.uniform_index(40));
        const int k = 1 + static_cast<int>(seeds.uniform_index(static_cast<std::size_t>(n)));
        auto data = make_dataset(n, 2, 1, true, seeds.next_u64());
        RngStream rng(seeds.next_u64());
        auto parts = split_dataset(data, k, rng);
        std::size_t total = 0;
        std::size_t max_size = 0, min_size = data.size();
        std::multiset<std::uint64_t> merged;
        for (const auto& p : parts) {
            total += p.size();
            max_size = std::max(max_size, p.size());
            min_size = std::min(min_size, p.size());
            auto sigs = tuple_signatures(p);
            merged.insert(sigs.begin(), sigs.end());
        }
        CHECK(total == data.size());
        CHECK(max_size - min_size <= 1);
        CHECK(merged == tuple_signatures(data));
    }
}

TEST_CASE("dataset csv round trip is exact") {
    auto data = make_dataset(50, 3, 2);
    const auto path = std::filesystem::temp_directory_path() / "dope_test_roundtrip.csv";
    write_dataset_csv(data, path.string());
    auto loaded = read_dataset_csv(path.string());
    REQUIRE(loaded.size() == data.size());
    CHECK(loaded.meta().obs_dim == 3);
    CHECK(loaded.meta().reward_dim == 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(data[i].x == loaded[i].x);
        CHECK(data[i].action == loaded[i].action);
        CHECK(data[i].reward == loaded[i].reward);
        CHECK(data[i].x_next == loaded[i].x_next);
        CHECK(data[i].step == loaded[i].step);
    }
    std::filesystem::remove(path);
}

TEST_CASE("dataset csv: empty step column for discounted data") {
    auto data = make_dataset(5, 2, 1, /*with_steps=*/false);
    const auto path = std::filesystem::temp_directory_path() / "dope_test_nostep.csv";
    write_dataset_csv(data, path.string());
    std::ifstream in(path);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header.rfind("step,x_0", 0) == 0);
    CHECK(first.front() == ','); // empty step field
    auto loaded = read_dataset_csv(path.string());
    CHECK_FALSE(loaded[0].step.has_value());
    std::filesystem::remove(path);
}

TEST_CASE("filter_step selects exactly the labeled tuples") {
    auto data = make_dataset(30);
    auto part = data.filter_step(2);
    CHECK(part.size() == 10);
    for (std::size_t i = 0; i < part.size(); ++i)
        CHECK(part[i].step == 2);
}

TEST_CASE("content hash is order and content sensitive") {
    auto a = make_dataset(10, 2, 1, true, 1);
    auto b = make_dataset(10, 2, 1, true, 1);
    auto c = make_dataset(10, 2, 1, true, 2);
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("validate_probs enforces the simplex within 1e-9") {
    CHECK_NOTHROW(validate_probs(Eigen::Vector2d(0.3, 0.7)));
    CHECK_THROWS(validate_probs(Eigen::Vector2d(0.3, 0.6)));
    CHECK_THROWS(validate_probs(Eigen::Vector2d(-0.1, 1.1)));
}
