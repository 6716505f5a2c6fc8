#include <catch2/catch_amalgamated.hpp>

#include "ditto/rng.hpp"
#include "ditto/trace.hpp"

using namespace ditto;

namespace {

Trace random_trace(Rng& rng, int device_count, int64_t horizon_us, int max_events) {
    Trace t;
    t.device_count = device_count;
    t.horizon_us = horizon_us;
    int n = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_events + 1)));
    for (int i = 0; i < n; ++i) {
        TraceEvent ev;
        ev.timestamp_us = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(horizon_us)));
        ev.device_id = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(device_count)));
        ev.op = rng.uniform() < 0.5 ? Op::read : Op::write;
        if (rng.uniform() < 0.3) {
            ev.offset_blocks = static_cast<int64_t>(rng.uniform_int(1 << 20));
            ev.size_blocks = 1 + static_cast<int64_t>(rng.uniform_int(128));
        }
        t.events.push_back(ev);
    }
    std::stable_sort(t.events.begin(), t.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.timestamp_us < b.timestamp_us; });
    return t;
}

}  // namespace

TEST_CASE("parse_trace maps fields directly") {
    Trace t = parse_trace("0,1,R\n500,0,W\n", 2, 1000);
    REQUIRE(t.events.size() == 2);
    CHECK(t.events[0].timestamp_us == 0);
    CHECK(t.events[0].device_id == 1);
    CHECK(t.events[0].op == Op::read);
    CHECK(t.events[1].timestamp_us == 500);
    CHECK(t.events[1].device_id == 0);
    CHECK(t.events[1].op == Op::write);
}

TEST_CASE("parse_trace handles empty stream") {
    Trace t = parse_trace("", 4, 1000);
    CHECK(t.events.empty());
    CHECK(t.device_count == 4);
}

TEST_CASE("parse_trace rejects out-of-range device") {
    CHECK_THROWS_AS(parse_trace("10,7,R\n", 4, 1000), domain_error);
}

TEST_CASE("parse_trace rejects malformed rows with line numbers") {
    try {
        parse_trace("0,1,R\nbroken\n", 2, 1000);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.line == 2);
    }
    try {
        parse_trace("0,1,R\n5,x,W\n", 2, 1000);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(parse_trace("0,1,Q\n", 2, 1000), parse_error);
    CHECK_THROWS_AS(parse_trace("0,1\n", 2, 1000), parse_error);
    CHECK_THROWS_AS(parse_trace("0,1,R,5\n", 2, 1000), parse_error);
    CHECK_THROWS_AS(parse_trace("1000,1,R\n", 2, 1000), domain_error);
}

TEST_CASE("parse_trace sorts unsorted input stably") {
    Trace t = parse_trace("500,0,W\n0,1,R\n500,1,R\n", 2, 1000);
    REQUIRE(t.events.size() == 3);
    CHECK(t.events[0].timestamp_us == 0);
    CHECK(t.events[1].device_id == 0);  // first 500 keeps input order
    CHECK(t.events[2].device_id == 1);
}

TEST_CASE("serialize_trace inverts parse") {
    Trace t = parse_trace("0,1,R\n500,0,W\n", 2, 1000);
    CHECK(serialize_trace(t) == "0,1,R\n500,0,W\n");
    Trace empty;
    CHECK(serialize_trace(empty).empty());
}

TEST_CASE("parse/serialize round trip on random traces") {
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        Trace t = random_trace(rng, 1 + static_cast<int>(rng.uniform_int(8)), 64000, 300);
        Trace back = parse_trace(serialize_trace(t), t.device_count, t.horizon_us);
        REQUIRE(back == t);
    }
}

TEST_CASE("characterize computes ratio, counts, utilization") {
    Trace t;
    t.device_count = 4;
    t.horizon_us = 4000;
    auto add = [&](int64_t ts, int dev, Op op) {
        t.events.push_back({ts, dev, op, std::nullopt, std::nullopt});
    };
    add(0, 0, Op::read);
    add(100, 0, Op::read);
    add(200, 1, Op::read);
    add(300, 3, Op::write);
    WorkloadConfig cfg = characterize(t, 1000);
    CHECK(cfg.read_ratio == 0.75);
    CHECK(cfg.total_requests == 4);
    REQUIRE(cfg.device_utilization.size() == 4);
    CHECK(cfg.device_utilization[0] == 0.5);
    CHECK(cfg.device_utilization[1] == 0.25);
    CHECK(cfg.device_utilization[2] == 0.0);
    CHECK(cfg.device_utilization[3] == 0.25);
}

TEST_CASE("characterize burstiness is the index of dispersion") {
    Trace t;
    t.device_count = 1;
    t.horizon_us = 4000;
    // per-bin counts [4,0,4,0]
    for (int64_t ts : {0, 1, 2, 3, 2000, 2001, 2002, 2003})
        t.events.push_back({ts, 0, Op::read, std::nullopt, std::nullopt});
    CHECK(characterize(t, 1000).burstiness == 2.0);

    Trace u;
    u.device_count = 1;
    u.horizon_us = 4000;
    for (int b = 0; b < 4; ++b)
        for (int i = 0; i < 2; ++i)
            u.events.push_back({b * 1000 + i, 0, Op::write, std::nullopt, std::nullopt});
    CHECK(characterize(u, 1000).burstiness == 0.0);
}

TEST_CASE("characterize rejects non-positive bin width") {
    Trace t;
    CHECK_THROWS_AS(characterize(t, 0), domain_error);
    CHECK_THROWS_AS(characterize(t, -5), domain_error);
}

TEST_CASE("characterize on empty trace") {
    Trace t;
    t.device_count = 3;
    t.horizon_us = 2000;
    WorkloadConfig cfg = characterize(t, 1000);
    CHECK(cfg.read_ratio == 0.0);
    CHECK(cfg.total_requests == 0);
    CHECK(cfg.burstiness == 0.0);
}

TEST_CASE("characterize invariants on random traces") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        Trace t = random_trace(rng, 1 + static_cast<int>(rng.uniform_int(8)), 64000, 300);
        WorkloadConfig cfg = characterize(t, 1000);
        if (cfg.total_requests > 0) {
            double sum = 0.0;
            for (double u : cfg.device_utilization)
                sum += u;
            CHECK(std::abs(sum - 1.0) <= 1e-9);
            // read_ratio * total rounds back to the read count it came from
            int64_t reads = 0;
            for (const auto& ev : t.events)
                if (ev.op == Op::read)
                    ++reads;
            CHECK(std::llround(cfg.read_ratio * static_cast<double>(cfg.total_requests)) == reads);
        }

        // permutation invariance: reversed event order characterizes identically
        Trace shuffled = t;
        std::reverse(shuffled.events.begin(), shuffled.events.end());
        std::stable_sort(shuffled.events.begin(), shuffled.events.end(),
                         [](const TraceEvent& a, const TraceEvent& b) { return a.timestamp_us < b.timestamp_us; });
        WorkloadConfig cfg2 = characterize(shuffled, 1000);
        CHECK(cfg2.read_ratio == cfg.read_ratio);
        CHECK(cfg2.total_requests == cfg.total_requests);
        CHECK(cfg2.device_utilization == cfg.device_utilization);

        // shifting by whole bins with the horizon extended keeps ratio/count/util
        Trace shifted = t;
        shifted.horizon_us += 5000;
        for (auto& ev : shifted.events)
            ev.timestamp_us += 5000;
        WorkloadConfig cfg3 = characterize(shifted, 1000);
        CHECK(cfg3.read_ratio == cfg.read_ratio);
        CHECK(cfg3.total_requests == cfg.total_requests);
        CHECK(cfg3.device_utilization == cfg.device_utilization);
    }
}

TEST_CASE("config_vector layout and scaling") {
    WorkloadConfig cfg;
    cfg.read_ratio = 0.75;
    cfg.total_requests = 4;
    cfg.burstiness = 0.0;
    cfg.device_utilization = {0.5, 0.25, 0.0, 0.25};
    auto v = config_vector(cfg, 8.0);
    REQUIRE(v.size() == 7);
    CHECK(v[0] == 0.75);
    CHECK(v[1] == 0.5);
    CHECK(v[2] == 0.0);
    CHECK(v[3] == 0.5);
    CHECK(v[4] == 0.25);
    CHECK(v[5] == 0.0);
    CHECK(v[6] == 0.25);

    WorkloadConfig zero;
    zero.device_utilization = {0, 0, 0, 0};
    auto vz = config_vector(zero, 8.0);
    REQUIRE(vz.size() == 7);
    for (double x : vz)
        CHECK(x == 0.0);

    WorkloadConfig bursty = cfg;
    bursty.burstiness = 1.0;
    CHECK(config_vector(bursty, 8.0)[2] == 0.5);

    CHECK_THROWS_AS(config_vector(cfg, 0.0), domain_error);
}
