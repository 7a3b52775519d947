#include <doctest.h>

#include "shardsim/audit.hpp"
#include "shardsim/rng.hpp"
#include "shardsim/simnet.hpp"

using namespace shardsim;
using namespace shardsim::sim;

namespace {

ScenarioConfig small_honest() {
    ScenarioConfig cfg;
    cfg.seed = 42;
    cfg.nodes = 8;
    cfg.shard_count = 1;
    cfg.difficulty = 2;
    cfg.epoch_length = 6;
    cfg.epochs = 3;
    cfg.min_shard_size = 4;
    cfg.block_capacity = 32;
    cfg.users_per_shard = 6;
    cfg.workload.intra_shard_payment = 2.0;
    cfg.latency = {1, 1};
    return cfg;
}

ScenarioConfig sharded_mixed() {
    ScenarioConfig cfg;
    cfg.seed = 77;
    cfg.nodes = 24;
    cfg.shard_count = 4;
    cfg.difficulty = 2;
    cfg.epoch_length = 10;
    cfg.epochs = 5;
    cfg.min_shard_size = 3;
    cfg.block_capacity = 32;
    cfg.users_per_shard = 6;
    cfg.genesis_foreign_outputs_per_user = 2;
    cfg.workload.intra_shard_payment = 1.0;
    cfg.workload.cross_shard_payment = 3.0;
    cfg.workload.contract_step = 1.0;
    cfg.workload.peg_op = 1.0;
    cfg.workload.rollup_batch_every = 4;
    cfg.workload.vanishing_client_fraction = 0.2;
    cfg.latency = {1, 2};
    cfg.lock_deadline = 10;
    cfg.validation_period = 4;
    return cfg;
}

}  // namespace

TEST_CASE("scheduler: tie-breaker order, broadcast fan-out, causality") {
    Scheduler sched;

    SUBCASE("two events in one slot deliver in enqueue order") {
        sched.enqueue(0, 1, 2, PRaw{to_bytes("first")});
        sched.enqueue(0, 1, 2, PRaw{to_bytes("second")});
        SimEvent ev;
        REQUIRE(sched.step(ev));
        CHECK(std::get<PRaw>(ev.payload).data == to_bytes("first"));
        REQUIRE(sched.step(ev));
        CHECK(std::get<PRaw>(ev.payload).data == to_bytes("second"));
        CHECK_FALSE(sched.step(ev));
    }
    SUBCASE("broadcast to n targets makes n deliveries") {
        sched.set_broadcast_targets({5, 6, 7, 8});
        Rng rng(3);
        auto seqs = sched.enqueue_broadcast(
            1, PRaw{to_bytes("hello")}, [&] { return rng.in_range(1, 3); }, 0);
        CHECK(seqs.size() == 4);
        size_t delivered = 0;
        for (uint64_t slot = 1; slot <= 3; ++slot) {
            sched.advance_to(slot);
            SimEvent ev;
            while (sched.step(ev)) {
                CHECK(std::get<PRaw>(ev.payload).data == to_bytes("hello"));
                ++delivered;
            }
        }
        CHECK(delivered == 4);
        CHECK(sched.pending() == 0);
    }
    SUBCASE("latency draws reproduce under a fixed seed") {
        Rng a(9), b(9);
        std::vector<uint64_t> trace_a, trace_b;
        for (int i = 0; i < 50; ++i) trace_a.push_back(a.in_range(1, 3));
        for (int i = 0; i < 50; ++i) trace_b.push_back(b.in_range(1, 3));
        CHECK(trace_a == trace_b);
    }
    SUBCASE("events cannot be scheduled into the past") {
        sched.advance_to(5);
        CHECK_THROWS_AS(sched.enqueue(4, 0, 1, PRaw{}), Error);
        // same-slot is fine: seq places it after the cursor
        CHECK_NOTHROW(sched.enqueue(5, 0, 1, PRaw{}));
    }
}

TEST_CASE("scenario config: strict parsing and validation") {
    SUBCASE("round trip") {
        ScenarioConfig cfg = sharded_mixed();
        ScenarioConfig back = ScenarioConfig::from_json_text(cfg.to_json_text());
        CHECK(back.seed == cfg.seed);
        CHECK(back.shard_count == cfg.shard_count);
        CHECK(back.workload.cross_shard_payment == cfg.workload.cross_shard_payment);
        CHECK(back.latency.max_slots == cfg.latency.max_slots);
    }
    SUBCASE("unknown keys are rejected, naming the key") {
        try {
            ScenarioConfig::from_json_text(R"({"seed": 1, "shardCout": 2})");
            FAIL("expected rejection");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("shardCout") != std::string::npos);
        }
        CHECK_THROWS_AS(
            ScenarioConfig::from_json_text(R"({"workload": {"intraShardPayments": 1}})"),
            Error);
    }
    SUBCASE("field-level validation errors") {
        CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"shardCount": 3})"), Error);
        CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"nodes": 0})"), Error);
        CHECK_THROWS_AS(
            ScenarioConfig::from_json_text(R"({"byzantine": {"fraction": 1.0}})"), Error);
        CHECK_THROWS_AS(
            ScenarioConfig::from_json_text(R"({"latency": {"minSlots": 2, "maxSlots": 1}})"),
            Error);
        CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"sigScheme": "rot13"})"), Error);
        // comments are tolerated
        CHECK_NOTHROW(ScenarioConfig::from_json_text("{\n// tuned for tests\n\"seed\": 3}"));
    }
}

TEST_CASE("zero epochs: empty metrics, stable digest") {
    ScenarioConfig cfg = small_honest();
    cfg.epochs = 0;
    SimResult a = run_scenario(cfg);
    SimResult b = run_scenario(cfg);
    CHECK(a.epochs.empty());
    CHECK(a.total_committed_tx == 0);
    CHECK(a.digest() == b.digest());
}

TEST_CASE("identical config and seed give identical digests and transcripts") {
    ScenarioConfig cfg = small_honest();
    Transcript ta, tb;
    SimResult a = run_scenario(cfg, &ta);
    SimResult b = run_scenario(cfg, &tb);
    CHECK(a.digest() == b.digest());
    CHECK(ta.lines() == tb.lines());

    ScenarioConfig other = cfg;
    other.seed = 43;
    SimResult c = run_scenario(other);
    CHECK(a.digest() != c.digest());
}

TEST_CASE("honest single-shard payments: committed equals the generator's bookkeeping") {
    ScenarioConfig cfg = small_honest();
    cfg.epochs = 10;
    Transcript transcript;
    SimResult r = run_scenario(cfg, &transcript);
    CHECK(r.total_workload_emitted > 0);
    CHECK(r.total_workload_committed == r.total_workload_emitted);
    CHECK(r.total_committed_tx == r.total_workload_committed);
    CHECK(r.final_locks_outstanding == 0);

    // the auditor agrees the run was clean
    audit::AuditReport report = audit::audit_run(transcript.lines());
    INFO(report.to_string());
    CHECK(report.clean());
    CHECK(report.blocks_checked > 0);
}

TEST_CASE("mixed sharded run: sessions settle atomically and audit clean") {
    ScenarioConfig cfg = sharded_mixed();
    Transcript transcript;
    SimResult r = run_scenario(cfg, &transcript);
    CHECK(r.total_sessions_initiated > 10);
    CHECK(r.total_sessions_committed + r.total_sessions_rolled_back ==
          r.total_sessions_initiated);
    // vanishing clients guarantee some rollbacks, honest ones some commits
    CHECK(r.total_sessions_committed > 0);
    CHECK(r.total_sessions_rolled_back > 0);
    CHECK(r.final_locks_outstanding == 0);
    uint64_t minted = 0;
    for (const auto& e : r.epochs) minted += e.pegs_minted;
    CHECK(minted > 0);
    CHECK(r.epochs.size() == 5);

    audit::AuditReport report = audit::audit_run(transcript.lines());
    INFO(report.to_string());
    CHECK(report.clean());
    CHECK(report.sessions_checked >= r.total_sessions_committed);
}

TEST_CASE("parallel shard execution changes no digest and no transcript") {
    ScenarioConfig cfg = sharded_mixed();
    Transcript serial_t, parallel_t;
    SimResult serial = run_scenario(cfg, &serial_t, /*parallel=*/false);
    SimResult parallel = run_scenario(cfg, &parallel_t, /*parallel=*/true);
    CHECK(serial.digest() == parallel.digest());
    CHECK(serial_t.lines() == parallel_t.lines());
}

TEST_CASE("auditor flags an injected duplicate spend") {
    ScenarioConfig cfg = sharded_mixed();
    Transcript transcript;
    run_scenario(cfg, &transcript);
    std::vector<std::string> lines = transcript.lines();

    // find a session commit that deleted refs and replay it: the second
    // deletion pulls an already-spent ref
    size_t injected = 0;
    std::vector<std::string> tampered;
    for (const auto& line : lines) {
        tampered.push_back(line);
        if (!injected && line.find("\"type\":\"session_commit\"") != std::string::npos &&
            line.find("\"deletedRefs\":[{") != std::string::npos) {
            tampered.push_back(line);
            ++injected;
        }
    }
    REQUIRE(injected == 1);
    audit::AuditReport report = audit::audit_run(tampered);
    CHECK_FALSE(report.clean());
    bool found = false;
    for (const auto& f : report.findings) found = found || f.kind == "DuplicateSpend";
    CHECK(found);
}

TEST_CASE("auditor flags a byzantine-supermajority shard even though quorum accepted") {
    // byzantine members grind into shard 0 with enough weight to commit a
    // fabricated transaction; the audit catches what the quorum let through
    ScenarioConfig cfg;
    cfg.seed = 5;
    cfg.nodes = 24;
    cfg.shard_count = 4;
    cfg.difficulty = 2;
    cfg.epoch_length = 6;
    cfg.epochs = 2;
    cfg.min_shard_size = 1;
    cfg.users_per_shard = 4;
    cfg.workload.intra_shard_payment = 1.0;
    cfg.latency = {1, 1};
    cfg.byzantine.fraction = 0.6;  // ~14 of 24, all ground into shard 0
    cfg.byzantine.behavior = "sign_invalid";
    cfg.byzantine.target_shard = 0;

    Transcript transcript;
    SimResult r = run_scenario(cfg, &transcript);
    CHECK(r.epochs[0].max_byz_shard_permille >= 667);
    CHECK(r.epochs[0].invalid_blocks_proposed > 0);

    audit::AuditReport report = audit::audit_run(transcript.lines());
    CHECK_FALSE(report.clean());
    bool invalid_block = false;
    for (const auto& f : report.findings)
        invalid_block = invalid_block || f.kind == "InvalidCommittedBlock";
    CHECK(invalid_block);
}

TEST_CASE("below-threshold byzantine members cause no safety findings") {
    ScenarioConfig cfg = sharded_mixed();
    cfg.seed = 91;
    cfg.nodes = 24;
    cfg.byzantine.fraction = 0.12;  // 2 of 24: under a third of any shard
    cfg.byzantine.behavior = "sign_invalid";
    cfg.min_shard_size = 4;
    Transcript transcript;
    SimResult r = run_scenario(cfg, &transcript);
    CHECK(r.epochs[0].max_byz_shard_permille <= 333);
    audit::AuditReport report = audit::audit_run(transcript.lines());
    INFO(report.to_string());
    CHECK(report.clean());
}

TEST_CASE("silent and equivocating minorities do not break safety or the audit") {
    for (const char* behavior : {"silent", "equivocate", "bad_coordinator"}) {
        CAPTURE(behavior);
        ScenarioConfig cfg = sharded_mixed();
        cfg.seed = 17;
        cfg.byzantine.fraction = 0.2;
        cfg.byzantine.behavior = behavior;
        Transcript transcript;
        SimResult r = run_scenario(cfg, &transcript);
        audit::AuditReport report = audit::audit_run(transcript.lines());
        INFO(report.to_string());
        CHECK(report.clean());
        (void)r;
    }
}

TEST_CASE("a byzantine coordinator is detected by honest recomputation") {
    // the coordinator is VRF-elected, so scan a few seeds until a byzantine
    // node wins at least one epoch; detection must fire each time it does
    bool observed = false;
    for (uint64_t seed = 17; seed < 27 && !observed; ++seed) {
        ScenarioConfig cfg = sharded_mixed();
        cfg.seed = seed;
        cfg.epochs = 3;
        cfg.workload.peg_op = 0;
        cfg.workload.rollup_batch_every = 0;
        cfg.workload.cross_shard_payment = 0;
        cfg.byzantine.fraction = 0.3;
        cfg.byzantine.behavior = "bad_coordinator";
        SimResult r = run_scenario(cfg);
        for (const auto& e : r.epochs) observed = observed || e.coordinator_mismatches > 0;
    }
    CHECK(observed);
}

TEST_CASE("fraudulent batcher is caught and rolled back within the run") {
    ScenarioConfig cfg = sharded_mixed();
    cfg.seed = 23;
    cfg.epochs = 4;
    cfg.byzantine.fraudulent_batcher = true;
    Transcript transcript;
    SimResult r = run_scenario(cfg, &transcript);
    uint64_t accepted = 0, rolled = 0;
    for (const auto& e : r.epochs) {
        accepted += e.fraud_proofs_accepted;
        rolled += e.batches_rolled_back;
    }
    CHECK(accepted > 0);
    CHECK(rolled >= accepted);
    audit::AuditReport report = audit::audit_run(transcript.lines());
    INFO(report.to_string());
    CHECK(report.clean());
}
