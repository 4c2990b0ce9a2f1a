#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ctxmri {

enum class Anatomy { Knee, Brain };
enum class Contrast { PD, PDFS, T1, T1PRE, T1POST, T2, FLAIR };
enum class Sequence { Turbospinecho, Flash, QDess };
enum class Sex { M, F };

/// Structured scan metadata. Every field is optional; the empty record is
/// the unconditional token.
struct ScanMetadata {
  std::optional<Anatomy> anatomy;
  std::optional<int> slice_index;
  std::optional<Contrast> contrast;
  std::vector<std::string> pathologies;
  std::optional<Sequence> sequence;
  std::optional<double> tr_ms;
  std::optional<double> te_ms;
  std::optional<double> ti_ms;
  std::optional<double> flip_angle_deg;
  std::optional<int> age_years;
  std::optional<Sex> sex;

  bool operator==(const ScanMetadata&) const = default;
  bool empty() const;
};

/// Fixed 16-label pathology vocabulary: 4 knee-type, 4 brain-type, 8
/// anatomy-agnostic. The phantom generator defines a lesion signature for
/// each label.
const std::vector<std::string>& pathology_vocabulary();
bool pathology_known(const std::string& label);
int pathology_index(const std::string& label);

/// Fixed-length conditioning encoding replacing a learned text embedding.
struct ConditioningVector {
  static constexpr int kDim = 64;
  std::array<double, kDim> values{};
  std::uint32_t present_flags = 0;

  bool is_unconditional() const { return present_flags == 0; }
  bool operator==(const ConditioningVector&) const = default;
};

// present_flags bit assignments
enum MetadataGroup : std::uint32_t {
  kGroupAnatomy = 1u << 0,
  kGroupSlice = 1u << 1,
  kGroupContrast = 1u << 2,
  kGroupPathology = 1u << 3,
  kGroupSequence = 1u << 4,
  kGroupTR = 1u << 5,
  kGroupTE = 1u << 6,
  kGroupTI = 1u << 7,
  kGroupFA = 1u << 8,
  kGroupAge = 1u << 9,
  kGroupSex = 1u << 10,
};

/// Canonical comma-separated prompt. Follows the fastMRI ordering
/// (anatomy, slice, contrast, pathology, MR parameters) and, when a
/// sequence is present, leads with it; QDess records use the SKM-TEA
/// ordering with demographics after the slice and "Flip Angle" casing.
std::string to_prompt(const ScanMetadata& md);

/// Inverse of to_prompt. Throws ParseError naming the offending token.
ScanMetadata parse_prompt(const std::string& s);

struct FeaturizeOptions {
  bool drop_unknown_pathologies = false;  // default: throw
};

ConditioningVector featurize(const ScanMetadata& md, const FeaturizeOptions& opts = {});

/// Training-time condition dropout: with probability p_mrparams the
/// TR/TE/TI/FA group is cleared jointly; afterwards, with probability
/// p_uncond the whole record is cleared (the CFG unconditional branch).
ScanMetadata dropout_for_training(const ScanMetadata& md, std::uint64_t rng_seed,
                                  double p_mrparams = 0.5, double p_uncond = 0.1);

/// Checks field values against the dataset parameter ranges; throws
/// ConfigError on violation.
void validate_metadata(const ScanMetadata& md);

std::string anatomy_name(Anatomy a);
std::string contrast_name(Contrast c);
std::string sequence_name(Sequence s);

}  // namespace ctxmri
