#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samg/field.hpp"
#include "samg/io.hpp"
#include "samg/random.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

using namespace samg;

namespace {

LatentField single_pixel(std::initializer_list<double> channels) {
    LatentField f(static_cast<Eigen::Index>(channels.size()), 1, 1);
    Eigen::Index c = 0;
    for (double v : channels) f(c++, 0, 0) = v;
    return f;
}

EnergyMap row_map(std::initializer_list<double> values) {
    EnergyMap e(1, static_cast<Eigen::Index>(values.size()));
    Eigen::Index x = 0;
    for (double v : values) e(0, x++) = v;
    return e;
}

/// Reference convolution: explicitly builds the reflect-padded map, then
/// averages, independent of the production reflect-index arithmetic.
EnergyMap brute_force_box(const EnergyMap& e, int k) {
    const int r = k / 2;
    const Eigen::Index h = e.height(), w = e.width();
    auto reflect = [](Eigen::Index i, Eigen::Index n) {
        if (n == 1) return Eigen::Index(0);
        const Eigen::Index period = 2 * (n - 1);
        i = ((i % period) + period) % period;
        return i < n ? i : period - i;
    };
    GridArray<double> padded(h + 2 * r, w + 2 * r);
    for (Eigen::Index y = 0; y < h + 2 * r; ++y)
        for (Eigen::Index x = 0; x < w + 2 * r; ++x)
            padded(y, x) = e(reflect(y - r, h), reflect(x - r, w));
    EnergyMap out(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < k; ++dy)
                for (int dx = 0; dx < k; ++dx) acc += padded(y + dy, x + dx);
            out(y, x) = acc / (k * k);
        }
    return out;
}

EnergyMap random_map(std::mt19937_64& rng, Eigen::Index h, Eigen::Index w, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(0.0, scale);
    EnergyMap e(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) e(y, x) = dist(rng);
    return e;
}

}  // namespace

TEST_CASE("channel_mean_square matches hand arithmetic") {
    CHECK(channel_mean_square(single_pixel({1.5, 3.0, -1.5}))(0, 0) == doctest::Approx(4.5));
    CHECK(channel_mean_square(single_pixel({0.1, 0.2, -0.1}))(0, 0) == doctest::Approx(0.02));

    LatentField zero(3, 4, 5);
    CHECK((channel_mean_square(zero).array() == 0.0).all());
}

TEST_CASE("channel_mean_square is non-negative for random fields") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 50; ++trial) {
        LatentField f(3, 5, 4);
        for (Eigen::Index i = 0; i < f.size(); ++i) f.array().data()[i] = dist(rng);
        const EnergyMap e = channel_mean_square(f);
        CHECK((e.array() >= 0.0).all());
    }
}

TEST_CASE("minmax_normalize") {
    const double tau = 1e-8;
    SUBCASE("two-pixel map") {
        EnergyMap out = minmax_normalize(row_map({1.0, 3.0}), tau);
        CHECK(out(0, 0) == 0.0);
        CHECK(out(0, 1) == doctest::Approx(2.0 / (2.0 + tau)).epsilon(1e-12));
    }
    SUBCASE("constant map normalizes to zero") {
        EnergyMap out = minmax_normalize(row_map({5.0, 5.0, 5.0}), tau);
        CHECK((out.array() == 0.0).all());
    }
    SUBCASE("wide range") {
        EnergyMap out = minmax_normalize(row_map({0.0, 10.0}), tau);
        CHECK(out(0, 0) == 0.0);
        CHECK(out(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("output in [0, 1) for random maps") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 100; ++trial) {
            EnergyMap out = minmax_normalize(random_map(rng, 6, 7, 100.0), tau);
            CHECK((out.array() >= 0.0).all());
            CHECK((out.array() < 1.0).all());
        }
    }
    SUBCASE("rejects non-positive tau") {
        CHECK_THROWS_AS(minmax_normalize(row_map({1.0, 2.0}), 0.0), std::invalid_argument);
    }
}

TEST_CASE("broadcast_scale") {
    SUBCASE("constants multiply") {
        LatentField f(2, 2, 2);
        f.array().setConstant(2.0);
        EnergyMap m(2, 2);
        m.array().setConstant(3.0);
        CHECK((broadcast_scale(f, m).array() == 6.0).all());
    }
    SUBCASE("ones map is the identity") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> dist;
        LatentField f(3, 4, 5);
        for (Eigen::Index i = 0; i < f.size(); ++i) f.array().data()[i] = dist(rng);
        EnergyMap ones(4, 5);
        ones.array().setOnes();
        CHECK((broadcast_scale(f, ones).array() == f.array()).all());
    }
    SUBCASE("per-pixel scaling matches the overshoot example") {
        EnergyMap m(1, 1);
        m(0, 0) = 7.0;
        LatentField out = broadcast_scale(single_pixel({1.5, 3.0, -1.5}), m);
        CHECK(out(0, 0, 0) == doctest::Approx(10.5));
        CHECK(out(1, 0, 0) == doctest::Approx(21.0));
        CHECK(out(2, 0, 0) == doctest::Approx(-10.5));
    }
    SUBCASE("dimension mismatch throws") {
        LatentField f(2, 3, 3);
        EnergyMap m(4, 4);
        CHECK_THROWS_AS(broadcast_scale(f, m), std::invalid_argument);
    }
}

TEST_CASE("box_smooth") {
    SUBCASE("k=1 is the bit-for-bit identity") {
        std::mt19937_64 rng(5);
        EnergyMap e = random_map(rng, 5, 6);
        EnergyMap out = box_smooth(e, 1);
        CHECK((out.array() == e.array()).all());
    }
    SUBCASE("1x3 spike with reflect padding") {
        // Mirror-without-edge-repeat: the left neighbor of index 0 is index 1,
        // so the edge cells average {10, 0, 10}. Cross-checked against the
        // brute-force reference below.
        EnergyMap out = box_smooth(row_map({0.0, 10.0, 0.0}), 3);
        EnergyMap ref = brute_force_box(row_map({0.0, 10.0, 0.0}), 3);
        CHECK(out(0, 0) == doctest::Approx(20.0 / 3.0));
        CHECK(out(0, 1) == doctest::Approx(10.0 / 3.0));
        CHECK(out(0, 2) == doctest::Approx(20.0 / 3.0));
        for (Eigen::Index x = 0; x < 3; ++x)
            CHECK(out(0, x) == doctest::Approx(ref(0, x)).epsilon(1e-14));
    }
    SUBCASE("constant maps are fixed points for any kernel") {
        EnergyMap e(4, 4);
        e.array().setConstant(2.5);
        for (int k : {3, 5, 7}) {
            EnergyMap out = box_smooth(e, k);
            CHECK((out.array() - 2.5).abs().maxCoeff() == 0.0);
        }
    }
    SUBCASE("matches brute-force reflect-padded convolution") {
        std::mt19937_64 rng(13);
        for (int trial = 0; trial < 30; ++trial) {
            const Eigen::Index h = 1 + static_cast<Eigen::Index>(rng() % 8);
            const Eigen::Index w = 1 + static_cast<Eigen::Index>(rng() % 8);
            EnergyMap e = random_map(rng, h, w);
            for (int k : {3, 5}) {
                EnergyMap fast = box_smooth(e, k);
                EnergyMap slow = brute_force_box(e, k);
                for (Eigen::Index y = 0; y < h; ++y)
                    for (Eigen::Index x = 0; x < w; ++x)
                        CHECK(fast(y, x) == doctest::Approx(slow(y, x)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("rejects even or non-positive kernels") {
        EnergyMap e = row_map({1.0, 2.0});
        CHECK_THROWS_AS(box_smooth(e, 2), std::invalid_argument);
        CHECK_THROWS_AS(box_smooth(e, 0), std::invalid_argument);
        CHECK_THROWS_AS(box_smooth(e, -3), std::invalid_argument);
    }
}

TEST_CASE("LatentField validates construction") {
    CHECK_THROWS_AS(LatentField(0, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(LatentField(1, 2, 2, GridArray<double>::Zero(1, 3)),
                    std::invalid_argument);
    LatentField f(2, 3, 4);
    CHECK(f.size() == 24);
    CHECK(f.is_finite());
    f(1, 2, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(f.is_finite());
}

TEST_CASE("latent field binary round trip") {
    LatentField f = standard_normal_field(3, 4, 5, 42);
    std::stringstream buf;
    write_latent_field(buf, f);
    LatentField g = read_latent_field(buf);
    CHECK(g.channels() == 3);
    CHECK(g.height() == 4);
    CHECK(g.width() == 5);
    CHECK((g.array() == f.array()).all());
}

TEST_CASE("latent field header layout is LFLD + u32 dims") {
    LatentField f(2, 1, 3);
    std::stringstream buf;
    write_latent_field(buf, f);
    const std::string bytes = buf.str();
    REQUIRE(bytes.size() == 16 + 6 * 8);
    CHECK(bytes.substr(0, 4) == "LFLD");
    CHECK(static_cast<unsigned char>(bytes[4]) == 2);  // C, little-endian
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);  // H
    CHECK(static_cast<unsigned char>(bytes[12]) == 3); // W
}

TEST_CASE("pgm export rescales per map") {
    EnergyMap e = row_map({0.0, 5.0, 10.0});
    const std::string path = "test_field_export.pgm";
    write_pgm(path, e);
    std::ifstream is(path, std::ios::binary);
    std::string header;
    std::getline(is, header);
    CHECK(header == "P5");
    std::string dims, maxval;
    std::getline(is, dims);
    std::getline(is, maxval);
    CHECK(dims == "3 1");
    CHECK(maxval == "255");
    unsigned char px[3];
    is.read(reinterpret_cast<char*>(px), 3);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128);  // lround(127.5)
    CHECK(px[2] == 255);
    is.close();
    std::remove(path.c_str());
}

TEST_CASE("seeded normal fields are reproducible and roughly standard") {
    LatentField a = standard_normal_field(2, 16, 16, 123);
    LatentField b = standard_normal_field(2, 16, 16, 123);
    CHECK((a.array() == b.array()).all());
    LatentField c = standard_normal_field(2, 16, 16, 124);
    CHECK_FALSE((a.array() == c.array()).all());

    const double mean = a.array().mean();
    const double sd = std::sqrt((a.array() - mean).square().mean());
    CHECK(std::abs(mean) < 0.1);
    CHECK(sd == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("float instantiation of the field core compiles and behaves") {
    LatentFieldT<float> f(2, 2, 2);
    f.array().setConstant(2.0f);
    EnergyMapT<float> e = channel_mean_square(f);
    CHECK(e(0, 0) == doctest::Approx(4.0f));
    EnergyMapT<float> n = minmax_normalize(e, 1e-6f);
    CHECK((n.array() == 0.0f).all());
}
