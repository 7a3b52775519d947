#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace shardsim::audit {

struct Finding {
    std::string kind;    // DuplicateSpend, MixedTerminalSession, InvalidCommittedBlock, ...
    std::string detail;
    uint64_t slot = 0;
    int64_t shard = -1;
};

struct AuditReport {
    std::vector<Finding> findings;
    uint64_t blocks_checked = 0;
    uint64_t txs_replayed = 0;
    uint64_t sessions_checked = 0;
    uint64_t locks_checked = 0;
    uint64_t batches_checked = 0;
    uint64_t peg_events_checked = 0;

    bool clean() const { return findings.empty(); }
    std::string to_string() const;
    std::string to_json() const;
};

// Independently replays every committed block, session, peg operation and
// rollup commitment out of a run transcript; reports duplicate spends, mixed
// terminal sessions, invalid committed blocks, quorum failures, conservation
// violations and lock-release breaches. The validity rules here are a
// separate implementation from the protocol path. Throws Error on a corrupt
// transcript.
AuditReport audit_run(const std::vector<std::string>& transcript_lines);
AuditReport audit_file(const std::string& path);

// Human-readable dumps for the inspect command. Identifiers may be hex
// prefixes. Throws Error when nothing matches.
std::string inspect_block(const std::vector<std::string>& transcript_lines,
                          const std::string& block_hash_prefix);
std::string inspect_session(const std::vector<std::string>& transcript_lines,
                            const std::string& session_id_prefix);

}  // namespace shardsim::audit
