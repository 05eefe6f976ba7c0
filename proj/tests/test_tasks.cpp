#include <doctest.h>

#include <set>

#include "vsml/tasks.hpp"

using namespace vsml;

namespace {

std::vector<uint8_t> idx_bytes(uint8_t ndims, const std::vector<uint32_t>& dims,
                               const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> b{0, 0, 0x08, ndims};
  for (uint32_t d : dims) {
    b.push_back(static_cast<uint8_t>(d >> 24));
    b.push_back(static_cast<uint8_t>(d >> 16));
    b.push_back(static_cast<uint8_t>(d >> 8));
    b.push_back(static_cast<uint8_t>(d));
  }
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

}  // namespace

TEST_CASE("idx parser accepts image and label headers") {
  SUBCASE("3-D image tensor") {
    const auto bytes = idx_bytes(3, {2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    const IdxTensor t = parse_idx(bytes);
    CHECK(t.shape == std::vector<int>{2, 2, 2});
    CHECK(t.data.size() == 8);
    CHECK(t.data[5] == 6);
  }
  SUBCASE("1-D label tensor") {
    const auto bytes = idx_bytes(1, {3}, {7, 1, 9});
    const IdxTensor t = parse_idx(bytes);
    CHECK(t.shape == std::vector<int>{3});
    CHECK(t.data == std::vector<uint8_t>{7, 1, 9});
  }
  SUBCASE("truncation reports expected and actual byte counts") {
    const auto bytes = idx_bytes(3, {2, 2, 2}, {1, 2, 3});
    try {
      parse_idx(bytes);
      FAIL("expected format error");
    } catch (const ConfigError& err) {
      const std::string msg = err.what();
      CHECK(msg.find("expected 24") != std::string::npos);
      CHECK(msg.find("have 19") != std::string::npos);
    }
  }
  SUBCASE("bad magic and bad dtype are rejected with offsets") {
    std::vector<uint8_t> bad{1, 0, 0x08, 1, 0, 0, 0, 0};
    CHECK_THROWS_WITH_AS(parse_idx(bad), doctest::Contains("offset 0"), ConfigError);
    std::vector<uint8_t> bad_type{0, 0, 0x09, 1, 0, 0, 0, 0};
    CHECK_THROWS_WITH_AS(parse_idx(bad_type), doctest::Contains("offset 2"), ConfigError);
  }
}

TEST_CASE("random task generation is seeded and class-bounded") {
  Mat xs1, xs2;
  std::vector<int> ys1, ys2;
  make_random_task(5, 20, 4, 2, xs1, ys1);
  make_random_task(5, 20, 4, 2, xs2, ys2);
  CHECK(xs1 == xs2);
  CHECK(ys1 == ys2);
  for (int y : ys1) CHECK((y == 0 || y == 1));

  make_random_task(6, 20, 4, 2, xs2, ys2);
  CHECK(xs1 != xs2);
}

TEST_CASE("the random source cycles its pool without repeats inside a cycle") {
  TaskSpec spec;
  spec.source = TaskSpec::Source::random;
  spec.input_dim = 3;
  spec.class_count = 2;
  spec.random_points = 20;
  spec.episode_length = 100;
  EpisodeStream stream(spec, nullptr, 7);

  std::set<std::string> seen;
  std::vector<std::string> first_cycle;
  for (int t = 0; t < 20; ++t) {
    const Example ex = stream.next();
    std::string key;
    for (int i = 0; i < 3; ++i) key += std::to_string(ex.x[i]) + ",";
    CHECK(!seen.count(key));  // no repeats within one pass over the pool
    seen.insert(key);
    first_cycle.push_back(key);
  }
  // Beyond the pool size the same points come back.
  for (int t = 0; t < 20; ++t) {
    const Example ex = stream.next();
    std::string key;
    for (int i = 0; i < 3; ++i) key += std::to_string(ex.x[i]) + ",";
    CHECK(seen.count(key));
  }
}

TEST_CASE("sum-sign labels follow the sign of the sum with ties to class 0") {
  Rng rng(1);
  SUBCASE("hand-checked values") {
    Vec x(3);
    x << 0.5, -0.2, 0.1;
    CHECK((x.sum() > 0.0 ? 1 : 0) == 1);
    TaskSpec spec;
    spec.source = TaskSpec::Source::sum_sign;
    spec.input_dim = 3;
    EpisodeStream stream(spec, nullptr, 3);
    for (int t = 0; t < 50; ++t) {
      const Example ex = stream.next();
      CHECK(ex.label == (ex.x.sum() > 0.0 ? 1 : 0));
    }
  }
  SUBCASE("all-zero input is class 0 by the tie rule") {
    // make_sum_sign_example never draws exact zeros, so check the rule
    // directly through the labelling expression it implements.
    Vec zero = Vec::Zero(4);
    CHECK((zero.sum() > 0.0 ? 1 : 0) == 0);
  }
  SUBCASE("labels balance to 0.5 over many draws") {
    int ones = 0;
    const int n = 100000;
    for (int t = 0; t < n; ++t) ones += make_sum_sign_example(rng, 5).label;
    const double frac = static_cast<double>(ones) / n;
    CHECK(std::abs(frac - 0.5) < 0.01);
  }
}

TEST_CASE("random projections preserve scale and are fixed per seed") {
  const int dim = 32;
  SUBCASE("same seed, same matrix") {
    CHECK(make_projection(dim, dim, 9) == make_projection(dim, dim, 9));
    CHECK(make_projection(dim, dim, 9) != make_projection(dim, dim, 10));
  }
  SUBCASE("expected squared norm is preserved within 5%") {
    Rng rng(12);
    Vec x(dim);
    rng.fill_normal(x);
    const double base = x.squaredNorm();
    double acc = 0.0;
    const int draws = 10000;
    for (int t = 0; t < draws; ++t) {
      const Mat p = make_projection(dim, dim, 1000 + static_cast<uint64_t>(t));
      acc += (p * x).squaredNorm();
    }
    CHECK(std::abs(acc / draws - base) / base < 0.05);
  }
}

TEST_CASE("bilinear rescale behaves on identity, constants, and checkerboards") {
  SUBCASE("28 -> 28 is the identity") {
    Rng rng(3);
    Vec img(28 * 28);
    rng.fill_normal(img);
    CHECK(rescale_image(img, 28, 28, 28) == img);
  }
  SUBCASE("constant images stay constant at any size") {
    const Vec img = Vec::Constant(28 * 28, 0.37);
    for (int size : {14, 32}) {
      const Vec out = rescale_image(img, 28, 28, size);
      CHECK(out.size() == size * size);
      CHECK((out.array() - 0.37).abs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("downscaling a checkerboard preserves the mean within 2%") {
    Vec img(28 * 28);
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x) img[y * 28 + x] = (x + y) % 2 == 0 ? 1.0 : 0.0;
    const Vec out = rescale_image(img, 28, 28, 14);
    CHECK(std::abs(out.mean() - img.mean()) / img.mean() < 0.02);
  }
  SUBCASE("unsupported sizes are rejected") {
    CHECK_THROWS_AS(rescale_image(Vec::Zero(28 * 28), 28, 28, 20), ConfigError);
  }
}

TEST_CASE("cumulative accuracy follows the running-mean formula") {
  SUBCASE("hand-computed curve") {
    const auto curve = cumulative_accuracy({1, 0, 1, 1});
    REQUIRE(curve.size() == 4);
    CHECK(curve[0] == doctest::Approx(1.0));
    CHECK(curve[1] == doctest::Approx(0.5));
    CHECK(curve[2] == doctest::Approx(2.0 / 3.0));
    CHECK(curve[3] == doctest::Approx(0.75));
  }
  SUBCASE("all wrong gives zeros") {
    for (double v : cumulative_accuracy({0, 0, 0, 0, 0})) CHECK(v == 0.0);
  }
  SUBCASE("exhaustive over every 4-step trace") {
    for (int mask = 0; mask < 16; ++mask) {
      std::vector<int> c;
      for (int t = 0; t < 4; ++t) c.push_back((mask >> t) & 1);
      const auto curve = cumulative_accuracy(c);
      int sum = 0;
      for (int t = 0; t < 4; ++t) {
        sum += c[static_cast<size_t>(t)];
        CHECK(curve[static_cast<size_t>(t)] ==
              doctest::Approx(static_cast<double>(sum) / (t + 1)));
      }
    }
  }
  SUBCASE("random 10-class guessing converges to 0.1") {
    Rng rng(77);
    std::vector<int> c;
    for (int t = 0; t < 2000; ++t) {
      c.push_back(rng.uniform_int(10) == rng.uniform_int(10) ? 1 : 0);
    }
    const auto curve = cumulative_accuracy(c);
    CHECK(std::abs(curve.back() - 0.1) < 0.02);
  }
}

TEST_CASE("episode streams are deterministic and honor augmentations") {
  TaskSpec spec;
  spec.source = TaskSpec::Source::random;
  spec.input_dim = 6;
  spec.class_count = 3;
  spec.episode_length = 50;
  spec.project = true;
  spec.permute = true;

  auto collect = [&](uint64_t seed) {
    EpisodeStream stream(spec, nullptr, seed);
    std::vector<double> sink;
    for (int t = 0; t < 30; ++t) {
      const Example ex = stream.next();
      for (int i = 0; i < ex.x.size(); ++i) sink.push_back(ex.x[i]);
      sink.push_back(ex.label);
    }
    return sink;
  };
  CHECK(collect(5) == collect(5));
  CHECK(collect(5) != collect(6));
}

TEST_CASE("task distribution sampling is weighted and validated") {
  TaskSpec a;
  a.source = TaskSpec::Source::random;
  a.input_dim = 4;
  TaskSpec b = a;
  b.input_dim = 9;

  TaskDistribution dist;
  dist.specs = {a, b};
  dist.weights = {0.0, 1.0};
  dist.validate();
  for (uint64_t s = 0; s < 20; ++s) CHECK(dist.sample(s).input_dim == 9);

  TaskDistribution bad;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.specs = {a};
  bad.weights = {1.0, 2.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("task spec validation") {
  TaskSpec t;
  t.source = TaskSpec::Source::dataset;
  CHECK_THROWS_AS(t.validate(), ConfigError);  // dataset needs a name
  t.dataset_name = "mnist:train";
  t.rescale_size = 20;
  CHECK_THROWS_AS(t.validate(), ConfigError);  // bad rescale
  t.rescale_size = 14;
  CHECK_NOTHROW(t.validate());

  TaskSpec r;
  r.source = TaskSpec::Source::random;
  r.input_dim = 0;
  CHECK_THROWS_AS(r.validate(), ConfigError);
}
