#include <doctest.h>

#include "ijdi/data_model.hpp"
#include "test_util.hpp"

using namespace ijdi;
using testutil::encode_rows;
using testutil::make_schema;

TEST_CASE("binarize uses a strict comparison") {
  const std::vector<double> p1{0.6, 0.4}, t1{0.5, 0.5};
  CHECK(binarize(p1, t1) == std::vector<std::uint8_t>{1, 0});

  const std::vector<double> p2{0.5}, t2{0.5};
  CHECK(binarize(p2, t2) == std::vector<std::uint8_t>{0});  // tie maps to 0

  const std::vector<double> p3{0.51, 0.49}, t3{0.5, 0.5};
  CHECK(binarize(p3, t3) == std::vector<std::uint8_t>{1, 0});

  const std::vector<double> short_theta{0.5};
  CHECK_THROWS_AS(binarize(p1, short_theta), SchemaError);
}

TEST_CASE("binarize is monotone in predictions and thresholds") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next_below(20);
    std::vector<double> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.next_double();
      t[i] = rng.next_double();
    }
    const auto base = binarize(p, t);

    std::vector<double> p_up = p;
    for (double& v : p_up) v = std::min(1.0, v + rng.next_double() * (1.0 - v));
    const auto raised = binarize(p_up, t);
    std::vector<double> t_down = t;
    for (double& v : t_down) v = v * rng.next_double();
    const auto lowered = binarize(p, t_down);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(raised[i] >= base[i]);
      CHECK(lowered[i] >= base[i]);
    }
  }
}

namespace {

AuditTable small_table() {
  Schema schema = make_schema({{"race", {"A", "B"}}, {"under25", {"true", "false"}}});
  const std::vector<std::vector<std::string>> rows = {
      {"A", "true"}, {"A", "false"}, {"B", "true"}, {"B", "false"}};
  auto codes = encode_rows(schema, rows);
  return AuditTable(schema, codes, {0, 0, 0, 1}, {0.9, 0.1, 0.2, 0.8}, {0.3, 0.5, 0.6, 0.7},
                    {0.5, 0.5, 0.5, 0.5});
}

}  // namespace

TEST_CASE("build_frame selects the requested outcome class") {
  Schema schema = make_schema({{"g", {"x", "y"}}});
  auto codes = encode_rows(schema, {{"x"}, {"y"}, {"x"}});
  AuditTable table(schema, codes, {0, 0, 1}, {0.9, 0.2, 0.9}, {0.4, 0.6, 0.5}, {0.5, 0.5, 0.5});

  const AuditFrame neg = build_frame(table, Side::Negative, 0.0);
  CHECK(neg.rows == std::vector<std::uint32_t>{0, 1});
  CHECK(neg.y_scan == std::vector<std::uint8_t>{1, 0});
  CHECK(neg.p_bar_b == doctest::Approx(0.5).epsilon(1e-15));

  SUBCASE("lambda zero collapses the expectation to the frame rate") {
    for (double v : neg.p_scan_censored) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }

  SUBCASE("lambda one recovers the base-rate offsets") {
    const AuditFrame f = build_frame(table, Side::Negative, 1.0);
    // p over the frame is [0.4, 0.6], so the mean is 0.5
    CHECK(f.p_scan_uncensored[0] == doctest::Approx(0.5 + (0.4 - 0.5)).epsilon(1e-12));
    CHECK(f.p_scan_uncensored[1] == doctest::Approx(0.5 + (0.6 - 0.5)).epsilon(1e-12));
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(build_frame(table, Side::Negative, -0.5), DomainError);
    AuditTable all_neg(schema, codes, {0, 0, 0}, {0.9, 0.2, 0.9}, {0.4, 0.6, 0.5},
                       {0.5, 0.5, 0.5});
    CHECK_THROWS_AS(build_frame(all_neg, Side::Positive, 0.0), DomainError);
  }
}

TEST_CASE("membership is a conjunction over included values") {
  AuditTable table = small_table();
  const AuditFrame frame = build_frame(table, Side::Negative, 0.0);  // rows 0,1,2

  Subgroup all;  // empty map includes everything
  CHECK(membership(all, frame) == std::vector<std::uint8_t>{1, 1, 1});

  Subgroup race_a{{{"race", {"A"}}}};
  CHECK(membership(race_a, frame) == std::vector<std::uint8_t>{1, 1, 0});

  Subgroup young_a{{{"race", {"A"}}, {"under25", {"true"}}}};
  CHECK(membership(young_a, frame) == std::vector<std::uint8_t>{1, 0, 0});

  Subgroup unknown{{{"height", {"tall"}}}};
  CHECK_THROWS_AS(membership(unknown, frame), SchemaError);
  Subgroup bad_value{{{"race", {"Z"}}}};
  CHECK_THROWS_AS(membership(bad_value, frame), SchemaError);
}

TEST_CASE("group_stats means") {
  Schema schema = make_schema({{"g", {"s", "t"}}});
  auto codes = encode_rows(schema, {{"s"}, {"s"}, {"t"}, {"t"}});
  AuditTable table(schema, codes, {0, 0, 0, 0}, {0.9, 0.9, 0.1, 0.1}, {0.2, 0.4, 0.6, 0.8},
                   {0.5, 0.5, 0.5, 0.5});
  const AuditFrame frame = build_frame(table, Side::Negative, 0.0);
  const Subgroup s{{{"g", {"s"}}}};
  const GroupStats st = group_stats(frame, s);
  CHECK(st.rate_in == doctest::Approx(1.0));
  CHECK(st.rate_out == doctest::Approx(0.0));
  CHECK(st.p_in == doctest::Approx(0.3));
  CHECK(st.p_out == doctest::Approx(0.7));

  const Subgroup whole;  // complement empty
  CHECK_THROWS_AS(group_stats(frame, whole), DomainError);
}

TEST_CASE("group_stats matches the textbook two-group construction") {
  // every member a false positive, every non-member a true negative
  Schema schema = make_schema({{"grp", {"A", "B"}}});
  const std::size_t n = 100;
  std::vector<std::vector<std::uint16_t>> codes(1, std::vector<std::uint16_t>(n));
  std::vector<std::uint8_t> y0(n, 0);
  std::vector<double> p_hat0(n), p(n), theta(n, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const bool in_a = i < n / 2;
    codes[0][i] = in_a ? 0 : 1;
    p[i] = in_a ? 0.51 : 0.49;
    p_hat0[i] = p[i];
  }
  AuditTable table(schema, codes, y0, p_hat0, p, theta);
  const AuditFrame frame = build_frame(table, Side::Negative, 0.0);
  const GroupStats st = group_stats(frame, Subgroup{{{"grp", {"A"}}}});
  CHECK(st.rate_in == doctest::Approx(1.0));
  CHECK(st.rate_out == doctest::Approx(0.0));
  CHECK(st.p_in == doctest::Approx(0.51).epsilon(1e-12));
  CHECK(st.p_out == doctest::Approx(0.49).epsilon(1e-12));
}

TEST_CASE("weighted decomposition holds to 1e-12 at a million rows") {
  const std::size_t n = 1000000;
  Rng rng(7);
  Schema schema = make_schema({{"g", {"s", "t"}}});
  std::vector<std::vector<std::uint16_t>> codes(1, std::vector<std::uint16_t>(n));
  std::vector<std::uint8_t> y0(n, 0);
  std::vector<double> p_hat0(n), p(n), theta(n, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    codes[0][i] = rng.bernoulli(0.3) ? 0 : 1;
    p_hat0[i] = rng.next_double();
    p[i] = rng.next_double();
  }
  AuditTable table(schema, codes, y0, p_hat0, p, theta);
  const AuditFrame frame = build_frame(table, Side::Negative, 0.0);
  const GroupStats st = group_stats(frame, Subgroup{{{"g", {"s"}}}});
  const double n_in = static_cast<double>(st.n_in), n_out = static_cast<double>(st.n_out);
  const double total = n_in + n_out;
  CHECK(std::abs(n_in * st.rate_in + n_out * st.rate_out - total * frame.p_bar_b) <=
        1e-12 * total);
  CHECK(std::abs(n_in * st.p_in + n_out * st.p_out - total * frame.p_bar) <= 1e-12 * total);
}

TEST_CASE("audit table validation rejects bad columns") {
  Schema schema = make_schema({{"g", {"x"}}});
  std::vector<std::vector<std::uint16_t>> codes = {{0, 0}};
  CHECK_THROWS_AS(AuditTable(schema, codes, {0, 2}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}),
                  DomainError);
  CHECK_THROWS_AS(AuditTable(schema, codes, {0, 1}, {1.2, 0.5}, {0.5, 0.5}, {0.5, 0.5}),
                  DomainError);
  CHECK_THROWS_AS(AuditTable(schema, codes, {0, 1}, {0.5, 0.5}, {0.5, 0.5}, {0.5}), SchemaError);
}
