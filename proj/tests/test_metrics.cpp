#include <doctest.h>

#include <cmath>

#include "madl/metrics.hpp"
#include "support.hpp"

using namespace madl;

namespace {

// O(n^2) all-pairs drawdown, the definitional oracle.
double brute_force_drawdown(const std::vector<double>& equity) {
    double worst = 0.0;
    for (std::size_t x = 0; x < equity.size(); ++x) {
        for (std::size_t y = x; y < equity.size(); ++y) {
            worst = std::max(worst, (equity[x] - equity[y]) / equity[x]);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("aRC basics") {
    std::vector<double> zeros(10, 0.0);
    CHECK(annualized_return_compounded(zeros, 252) == doctest::Approx(0.0));

    std::vector<double> small(252, 0.001);
    CHECK(annualized_return_compounded(small, 252) ==
          doctest::Approx(std::pow(1.001, 252) - 1.0).epsilon(1e-12));

    // One year compounding to x2 annualizes to 100%.
    std::vector<double> doubling(252, std::pow(2.0, 1.0 / 252.0) - 1.0);
    CHECK(annualized_return_compounded(doubling, 252) == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<double> bad = {0.01, -1.0};
    CHECK_THROWS_AS(annualized_return_compounded(bad, 252), std::domain_error);
}

TEST_CASE("aSD basics") {
    std::vector<double> constant(30, 0.004);
    CHECK(annualized_std_dev(constant, 252) == doctest::Approx(0.0));

    // Alternating +-0.01: sample stdev = 0.01 * sqrt(n/(n-1)).
    std::vector<double> alt(1000);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 0.01 : -0.01;
    const double n = static_cast<double>(alt.size());
    CHECK(annualized_std_dev(alt, 252) ==
          doctest::Approx(std::sqrt(252.0) * 0.01 * std::sqrt(n / (n - 1.0))).epsilon(1e-12));

    CHECK(annualized_std_dev(alt, 365) / annualized_std_dev(alt, 252) ==
          doctest::Approx(std::sqrt(365.0 / 252.0)).epsilon(1e-12));

    std::vector<double> one = {0.01};
    CHECK_THROWS_AS(annualized_std_dev(one, 252), UsageError);
}

TEST_CASE("max drawdown cases") {
    std::vector<double> rising = {1, 2, 3, 4};
    CHECK(max_drawdown(rising) == 0.0);
    std::vector<double> spec_case = {100, 120, 90, 110, 80};
    CHECK(max_drawdown(spec_case) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    std::vector<double> dip = {100, 50, 100};
    CHECK(max_drawdown(dip) == doctest::Approx(0.5));
}

TEST_CASE("max drawdown equals brute force on random series") {
    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.next_u64() % 300;
        std::vector<double> equity(n);
        double v = 1.0;
        for (auto& e : equity) {
            v *= 1.0 + rng.normal(0, 0.02);
            e = v;
        }
        CHECK(max_drawdown(equity) == brute_force_drawdown(equity));
    }
}

TEST_CASE("max loss duration cases") {
    std::vector<double> rising = {1, 2, 3, 4};
    CHECK(max_loss_duration(rising, 252) == 0.0);

    // High at index 1, first strictly surpassed at index 4: 3 periods.
    std::vector<double> recover = {1, 2, 1.5, 1.8, 2.1};
    CHECK(max_loss_duration(recover, 252) == doctest::Approx(3.0 / 252.0));

    // Flat series never surpasses its first value; the whole span counts.
    std::vector<double> flat(10, 1.0);
    CHECK(max_loss_duration(flat, 252) == doctest::Approx(9.0 / 252.0));

    // Unrecovered trailing drawdown counts through the final observation.
    std::vector<double> trailing = {1, 2, 1.5, 1.4, 1.3};
    CHECK(max_loss_duration(trailing, 252) == doctest::Approx(3.0 / 252.0));
}

TEST_CASE("information ratios") {
    SUBCASE("plain arithmetic") {
        auto ir = information_ratios(0.10, 0.20, 0.5, 1.0);
        CHECK(*ir.ir1 == doctest::Approx(0.5));
    }
    SUBCASE("JPM buy-and-hold wiring") {
        auto ir = information_ratios(0.1106, 0.3642, 0.7012, 5.82);
        CHECK(*ir.ir1 == doctest::Approx(0.30).epsilon(0.02));
        CHECK(*ir.ir2 == doctest::Approx(0.048).epsilon(0.02));
    }
    SUBCASE("negative return keeps its sign in IR**") {
        auto ir = information_ratios(-0.10, 0.20, 0.50, 1.0);
        CHECK(*ir.ir2 == doctest::Approx(-0.10));
        CHECK(*ir.ir3 == doctest::Approx(-0.01));
    }
    SUBCASE("sign of IR** and IR*** equals sign of aRC") {
        Rng rng(66);
        for (int trial = 0; trial < 100; ++trial) {
            const double arc = rng.uniform(-1, 1);
            auto ir = information_ratios(arc, rng.uniform(0.01, 1), rng.uniform(0.01, 1),
                                         rng.uniform(0.01, 10));
            if (arc > 0) {
                CHECK(*ir.ir2 > 0);
                CHECK(*ir.ir3 > 0);
            } else if (arc < 0) {
                CHECK(*ir.ir2 < 0);
                CHECK(*ir.ir3 < 0);
            }
        }
    }
    SUBCASE("zero denominators yield undefined markers, not exceptions") {
        auto ir = information_ratios(0.1, 0.0, 0.0, 0.0);
        CHECK_FALSE(ir.ir1.has_value());
        CHECK_FALSE(ir.ir2.has_value());
        CHECK_FALSE(ir.ir3.has_value());
        auto partial = information_ratios(0.1, 0.2, 0.0, 0.0);
        CHECK(partial.ir1.has_value());
        CHECK_FALSE(partial.ir2.has_value());
    }
}

TEST_CASE("report row renders percent units and markers") {
    EquityLine line;
    line.strategy_returns = {0.01, -0.005, 0.02};
    line.equity = {1.01, 1.00495, 1.0250};
    line.positions = {1, 1, 1};
    line.n_trades = 2;
    auto report = compute_report("TEST B&H", line, 252);
    CHECK(report.n_obs == 3);
    const std::string row = report_csv_row(report);
    CHECK(row.find("TEST B&H,") == 0);
    CHECK(report.ir1.has_value());
    // aRC reported in percent: internal fraction x 100.
    const double arc = annualized_return_compounded(line.strategy_returns, 252);
    CHECK(row.find(std::to_string(static_cast<int>(arc * 100))) != std::string::npos);
}
