#pragma once
// End-to-end orchestration: stage-I training, pseudo-label transfer, stage-II
// training, evaluation and figures, all under one resumable work directory.

#include <string>

#include "cc2d/config.hpp"
#include "cc2d/metrics.hpp"

namespace cc2d {

struct PipelineOptions {
  std::string data_root;
  std::string template_id;  // empty => first training image
  std::string workdir;
  RunConfig config;
  int64_t ssl_max_steps = 0;  // 0 => full epoch schedule
  int64_t tpl_max_steps = 0;
  bool make_figures = true;
};

struct PipelineResult {
  EvalReport test_report;
  std::string ssl_checkpoint;
  std::string tpl_checkpoint;
  std::string pseudo_labels_path;
  std::string report_path;
};

// Layout under workdir: ckpts/, pseudo/, reports/, figures/, logs/. Finished
// stages are detected by their artifacts and skipped on rerun; a lock file
// guards against two concurrent runs in the same directory.
PipelineResult run_pipeline(const PipelineOptions& opts);

}  // namespace cc2d
