#pragma once

#include <string>

#include "cwm/harness/checkpoint.hpp"
#include "cwm/harness/config.hpp"

namespace cwm::harness {

/// Runs pretrain | finetune | eval | probe | inspect. Every command except
/// inspect writes manifest.txt and report.json under `cfg.out`; training
/// commands also write metrics.jsonl and checkpoint.bin. Returns the report.
std::string run_command(const std::string& command, const RunConfig& cfg);

/// `cfg` with the model and network-shape keys replaced by those recorded in
/// the checkpoint.
RunConfig with_architecture_of(const RunConfig& cfg, const Checkpoint& ck);

}  // namespace cwm::harness
