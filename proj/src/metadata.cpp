#include "ctxmri/metadata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "ctxmri/error.hpp"
#include "ctxmri/rng.hpp"

namespace ctxmri {

bool ScanMetadata::empty() const { return *this == ScanMetadata{}; }

const std::vector<std::string>& pathology_vocabulary() {
  static const std::vector<std::string> vocab = {
      // knee-type
      "Meniscus Tear",
      "Displaced Meniscal Tissue",
      "Bone-Subchondral edema",
      "Cartilage Lesion",
      // brain-type
      "Nonspecific White Matter Lesion",
      "Enlarged Ventricles",
      "Extra-axial Mass",
      "Craniotomy",
      // anatomy-agnostic
      "Edema",
      "Joint Effusion",
      "Fracture",
      "Ligament Sprain",
      "Bone Lesion",
      "Cyst",
      "Hemorrhage",
      "Atrophy",
  };
  return vocab;
}

bool pathology_known(const std::string& label) { return pathology_index(label) >= 0; }

int pathology_index(const std::string& label) {
  const auto& vocab = pathology_vocabulary();
  for (size_t i = 0; i < vocab.size(); ++i)
    if (vocab[i] == label) return static_cast<int>(i);
  return -1;
}

std::string anatomy_name(Anatomy a) { return a == Anatomy::Knee ? "Knee" : "Brain"; }

std::string contrast_name(Contrast c) {
  switch (c) {
    case Contrast::PD: return "PD";
    case Contrast::PDFS: return "PDFS";
    case Contrast::T1: return "T1";
    case Contrast::T1PRE: return "T1PRE";
    case Contrast::T1POST: return "T1POST";
    case Contrast::T2: return "T2";
    case Contrast::FLAIR: return "FLAIR";
  }
  return "?";
}

std::string sequence_name(Sequence s) {
  switch (s) {
    case Sequence::Turbospinecho: return "Turbospinecho";
    case Sequence::Flash: return "Flash";
    case Sequence::QDess: return "Qdess";  // prompt rendering per the SKM-TEA format
  }
  return "?";
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("invalid number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("invalid integer: '" + s + "'");
  return v;
}

}  // namespace

std::string to_prompt(const ScanMetadata& md) {
  const bool skm = md.sequence.has_value() && *md.sequence == Sequence::QDess;
  std::vector<std::string> tokens;

  if (md.sequence) tokens.push_back(sequence_name(*md.sequence));
  if (md.anatomy) tokens.push_back(anatomy_name(*md.anatomy));
  if (md.slice_index) tokens.push_back("Slice " + std::to_string(*md.slice_index));
  if (md.contrast) tokens.push_back(contrast_name(*md.contrast));
  if (skm) {
    if (md.age_years) tokens.push_back("Age: " + std::to_string(*md.age_years));
    if (md.sex) tokens.push_back(std::string("Sex: ") + (*md.sex == Sex::M ? "M" : "F"));
  }
  if (!md.pathologies.empty()) {
    std::string tok = "Pathology: " + md.pathologies[0];
    tokens.push_back(tok);
    for (size_t i = 1; i < md.pathologies.size(); ++i) tokens.push_back(md.pathologies[i]);
  }
  if (md.tr_ms) tokens.push_back("TR: " + format_number(*md.tr_ms));
  if (md.te_ms) tokens.push_back("TE: " + format_number(*md.te_ms));
  if (md.ti_ms) tokens.push_back("TI: " + format_number(*md.ti_ms));
  if (md.flip_angle_deg)
    tokens.push_back((skm ? "Flip Angle: " : "Flip angle: ") + format_number(*md.flip_angle_deg));
  if (!skm) {
    if (md.age_years) tokens.push_back("Age: " + std::to_string(*md.age_years));
    if (md.sex) tokens.push_back(std::string("Sex: ") + (*md.sex == Sex::M ? "M" : "F"));
  }

  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ", ";
    out += tokens[i];
  }
  return out;
}

namespace {

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t next = s.find(", ", pos);
    if (next == std::string::npos) {
      tokens.push_back(s.substr(pos));
      break;
    }
    tokens.push_back(s.substr(pos, next - pos));
    pos = next + 2;
  }
  return tokens;
}

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

std::optional<Anatomy> anatomy_from(const std::string& s) {
  if (s == "Knee") return Anatomy::Knee;
  if (s == "Brain") return Anatomy::Brain;
  return std::nullopt;
}

std::optional<Contrast> contrast_from(const std::string& s) {
  for (Contrast c : {Contrast::PD, Contrast::PDFS, Contrast::T1, Contrast::T1PRE,
                     Contrast::T1POST, Contrast::T2, Contrast::FLAIR})
    if (contrast_name(c) == s) return c;
  return std::nullopt;
}

std::optional<Sequence> sequence_from(const std::string& s) {
  if (s == "Turbospinecho") return Sequence::Turbospinecho;
  if (s == "Flash") return Sequence::Flash;
  if (s == "Qdess" || s == "QDess") return Sequence::QDess;
  return std::nullopt;
}

}  // namespace

ScanMetadata parse_prompt(const std::string& s) {
  ScanMetadata md;
  if (s.empty()) return md;
  bool in_pathology = false;
  for (const std::string& tok : split_tokens(s)) {
    if (tok.empty()) throw ParseError("empty token in prompt");
    if (starts_with(tok, "Slice ")) {
      md.slice_index = parse_int(tok.substr(6));
      in_pathology = false;
    } else if (starts_with(tok, "Pathology: ")) {
      md.pathologies.push_back(tok.substr(11));
      in_pathology = true;
    } else if (starts_with(tok, "TR: ")) {
      md.tr_ms = parse_number(tok.substr(4));
      in_pathology = false;
    } else if (starts_with(tok, "TE: ")) {
      md.te_ms = parse_number(tok.substr(4));
      in_pathology = false;
    } else if (starts_with(tok, "TI: ")) {
      md.ti_ms = parse_number(tok.substr(4));
      in_pathology = false;
    } else if (starts_with(tok, "Flip angle: ") || starts_with(tok, "Flip Angle: ")) {
      md.flip_angle_deg = parse_number(tok.substr(12));
      in_pathology = false;
    } else if (starts_with(tok, "Age: ")) {
      md.age_years = parse_int(tok.substr(5));
      in_pathology = false;
    } else if (starts_with(tok, "Sex: ")) {
      const std::string v = tok.substr(5);
      if (v == "M")
        md.sex = Sex::M;
      else if (v == "F")
        md.sex = Sex::F;
      else
        throw ParseError("invalid sex token: '" + tok + "'");
      in_pathology = false;
    } else if (auto a = anatomy_from(tok)) {
      md.anatomy = *a;
      in_pathology = false;
    } else if (auto c = contrast_from(tok)) {
      md.contrast = *c;
      in_pathology = false;
    } else if (auto q = sequence_from(tok)) {
      md.sequence = *q;
      in_pathology = false;
    } else if (in_pathology) {
      md.pathologies.push_back(tok);
    } else {
      throw ParseError("unrecognized token: '" + tok + "'");
    }
  }
  return md;
}

namespace {

struct ParamRange {
  double lo, hi;
};

// Table ranges keyed by the record's dataset flavor (anatomy + sequence).
enum class Flavor { Knee, Brain, SkmTea, Unknown };

Flavor flavor_of(const ScanMetadata& md) {
  if (md.sequence && *md.sequence == Sequence::QDess) return Flavor::SkmTea;
  if (md.anatomy && *md.anatomy == Anatomy::Knee) return Flavor::Knee;
  if (md.anatomy && *md.anatomy == Anatomy::Brain) return Flavor::Brain;
  return Flavor::Unknown;
}

ParamRange tr_range(Flavor f) {
  switch (f) {
    case Flavor::Knee: return {2000.0, 3930.0};
    case Flavor::Brain: return {247.0, 15810.0};
    case Flavor::SkmTea: return {18.176, 20.36};
    default: return {18.176, 15810.0};
  }
}
ParamRange te_range(Flavor f) {
  switch (f) {
    case Flavor::Knee: return {24.0, 35.0};
    case Flavor::Brain: return {2.0, 126.0};
    case Flavor::SkmTea: return {5.796, 6.428};
    default: return {2.0, 126.0};
  }
}
ParamRange ti_range(Flavor f) {
  switch (f) {
    case Flavor::Knee: return {100.0, 100.0};
    case Flavor::Brain: return {100.0, 2500.0};
    default: return {100.0, 2500.0};
  }
}
ParamRange fa_range(Flavor f) {
  switch (f) {
    case Flavor::Knee: return {122.0, 150.0};
    case Flavor::Brain: return {69.0, 180.0};
    case Flavor::SkmTea: return {20.0, 20.0};
    default: return {20.0, 180.0};
  }
}

double minmax_norm(double v, ParamRange r, const char* what) {
  if (r.hi <= r.lo) return 0.5;  // degenerate table range (e.g. knee TI = 100)
  if (v < r.lo || v > r.hi) {
    static bool warned = false;
    if (!warned) {
      std::fprintf(stderr, "contextrecon: %s value %.6g outside table range [%g, %g], clamping\n",
                   what, v, r.lo, r.hi);
      warned = true;
    }
    v = std::clamp(v, r.lo, r.hi);
  }
  return (v - r.lo) / (r.hi - r.lo);
}

}  // namespace

ConditioningVector featurize(const ScanMetadata& md, const FeaturizeOptions& opts) {
  ConditioningVector cv;
  auto& v = cv.values;
  const Flavor flavor = flavor_of(md);

  if (md.anatomy) {
    v[md.anatomy == Anatomy::Knee ? 0 : 1] = 1.0;
    cv.present_flags |= kGroupAnatomy;
  }
  if (md.contrast) {
    v[2 + static_cast<int>(*md.contrast)] = 1.0;
    cv.present_flags |= kGroupContrast;
  }
  if (md.sequence) {
    v[9 + static_cast<int>(*md.sequence)] = 1.0;
    cv.present_flags |= kGroupSequence;
  }
  if (md.slice_index) {
    v[12] = std::clamp(static_cast<double>(*md.slice_index) / 30.0, 0.0, 1.0);
    cv.present_flags |= kGroupSlice;
  }
  for (const std::string& label : md.pathologies) {
    const int idx = pathology_index(label);
    if (idx < 0) {
      if (opts.drop_unknown_pathologies) {
        std::fprintf(stderr, "contextrecon: dropping unknown pathology label '%s'\n",
                     label.c_str());
        continue;
      }
      throw ConfigError("unknown pathology label: '" + label + "'");
    }
    v[13 + idx] = 1.0;
    cv.present_flags |= kGroupPathology;
  }
  if (md.tr_ms) {
    v[29] = minmax_norm(*md.tr_ms, tr_range(flavor), "TR");
    v[30] = 1.0;
    cv.present_flags |= kGroupTR;
  }
  if (md.te_ms) {
    v[31] = minmax_norm(*md.te_ms, te_range(flavor), "TE");
    v[32] = 1.0;
    cv.present_flags |= kGroupTE;
  }
  if (md.ti_ms) {
    v[33] = minmax_norm(*md.ti_ms, ti_range(flavor), "TI");
    v[34] = 1.0;
    cv.present_flags |= kGroupTI;
  }
  if (md.flip_angle_deg) {
    v[35] = minmax_norm(*md.flip_angle_deg, fa_range(flavor), "flip angle");
    v[36] = 1.0;
    cv.present_flags |= kGroupFA;
  }
  if (md.age_years) {
    v[37] = static_cast<double>(*md.age_years) / 100.0;
    v[38] = 1.0;
    cv.present_flags |= kGroupAge;
  }
  if (md.sex) {
    v[*md.sex == Sex::M ? 39 : 40] = 1.0;
    v[41] = 1.0;
    cv.present_flags |= kGroupSex;
  }
  return cv;
}

ScanMetadata dropout_for_training(const ScanMetadata& md, std::uint64_t rng_seed,
                                  double p_mrparams, double p_uncond) {
  Rng rng(rng_seed);
  ScanMetadata out = md;
  if (rng.uniform() < p_mrparams) {
    out.tr_ms.reset();
    out.te_ms.reset();
    out.ti_ms.reset();
    out.flip_angle_deg.reset();
  }
  if (rng.uniform() < p_uncond) out = ScanMetadata{};
  return out;
}

void validate_metadata(const ScanMetadata& md) {
  const Flavor flavor = flavor_of(md);
  auto check = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("metadata outside dataset ranges: ") + what);
  };
  auto in_range = [](double v, ParamRange r) { return v >= r.lo && v <= r.hi; };

  if (md.slice_index) {
    const int hi = flavor == Flavor::SkmTea ? 159 : (flavor == Flavor::Brain ? 25 : 30);
    check(*md.slice_index >= 0 && *md.slice_index <= hi, "slice index");
  }
  if (md.tr_ms) check(in_range(*md.tr_ms, tr_range(flavor)), "TR");
  if (md.te_ms) check(in_range(*md.te_ms, te_range(flavor)), "TE");
  if (md.ti_ms) check(in_range(*md.ti_ms, ti_range(flavor)), "TI");
  if (md.flip_angle_deg) check(in_range(*md.flip_angle_deg, fa_range(flavor)), "flip angle");
  if (md.contrast && md.anatomy) {
    if (flavor == Flavor::Knee)
      check(*md.contrast == Contrast::PD || *md.contrast == Contrast::PDFS, "knee contrast");
    if (flavor == Flavor::Brain)
      check(*md.contrast != Contrast::PD && *md.contrast != Contrast::PDFS, "brain contrast");
    if (flavor == Flavor::SkmTea)
      check(*md.contrast == Contrast::PD || *md.contrast == Contrast::T2, "SKM-TEA contrast");
  }
  if (md.age_years) check(*md.age_years > 0 && *md.age_years <= 120, "age");
  for (const std::string& label : md.pathologies)
    check(pathology_known(label), "pathology label");
}

}  // namespace ctxmri
