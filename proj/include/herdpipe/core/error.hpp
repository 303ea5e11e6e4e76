#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace herdpipe {

/// Failure categories raised across the pipeline. The CLI maps them onto
/// process exit codes (see `exit_code_for`).
enum class Errc {
  invalid_geometry,
  corrupt_mask,
  empty_mask,
  invalid_config,
  naming_overflow,
  decode,
  no_seeds,
  undefined_metrics,
  chunk_tracking,
  incomplete_store,
  store_inconsistent,
  not_an_embedding,
  truncation,
  invalid_input,
  stratification,
  invalid_class,
  shape,
  divergence,
  empty_sequence,
  undefined_cosine,
  conflicting_annotation,
  degenerate_crop,
  dependency,
  stage_failure,
  io,
  format,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_geometry: return "invalid-geometry";
    case Errc::corrupt_mask: return "corrupt-mask";
    case Errc::empty_mask: return "empty-mask";
    case Errc::invalid_config: return "invalid-config";
    case Errc::naming_overflow: return "naming-overflow";
    case Errc::decode: return "decode";
    case Errc::no_seeds: return "no-seeds";
    case Errc::undefined_metrics: return "undefined-metrics";
    case Errc::chunk_tracking: return "chunk-tracking";
    case Errc::incomplete_store: return "incomplete-store";
    case Errc::store_inconsistent: return "store-inconsistent";
    case Errc::not_an_embedding: return "not-an-embedding";
    case Errc::truncation: return "truncation";
    case Errc::invalid_input: return "invalid-input";
    case Errc::stratification: return "stratification";
    case Errc::invalid_class: return "invalid-class";
    case Errc::shape: return "shape";
    case Errc::divergence: return "divergence";
    case Errc::empty_sequence: return "empty-sequence";
    case Errc::undefined_cosine: return "undefined-cosine";
    case Errc::conflicting_annotation: return "conflicting-annotation";
    case Errc::degenerate_crop: return "degenerate-crop";
    case Errc::dependency: return "dependency";
    case Errc::stage_failure: return "stage-failure";
    case Errc::io: return "io";
    case Errc::format: return "format";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// 0 success, 2 config error, 3 dependency error, 4 stage failure.
inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_config: return 2;
    case Errc::dependency: return 3;
    default: return 4;
  }
}

}  // namespace herdpipe
