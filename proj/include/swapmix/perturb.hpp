#pragma once

// Feature-row swaps and the enumeration of all single-swap perturbations of
// a question.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swapmix/bundle.hpp"
#include "swapmix/encoder.hpp"
#include "swapmix/swapplan.hpp"

namespace swapmix {

/// Replaces row j of V with donor via the masked form
///   V' = V (.) P + S (.) (J - P)
/// where P is all ones except a zero row j, S repeats donor in every row and
/// J is all ones. The masks are evaluated per element rather than stored.
inline FeatureMatrix apply_swap(const FeatureMatrix& v, std::size_t j, std::span<const float> donor) {
  if (j >= v.rows())
    throw Error(ErrorKind::IndexOutOfRange,
                "row " + std::to_string(j) + " of a " + std::to_string(v.rows()) + "-row matrix");
  if (donor.size() != v.cols())
    throw Error(ErrorKind::DimensionMismatch, "donor feature has dimension " + std::to_string(donor.size()) +
                                                  ", matrix has " + std::to_string(v.cols()));
  std::vector<float> out(v.rows() * v.cols());
  for (std::size_t i = 0; i < v.rows(); ++i) {
    const float p = (i == j) ? 0.0f : 1.0f;
    const float pc = 1.0f - p;
    for (std::size_t c = 0; c < v.cols(); ++c) out[i * v.cols() + c] = v.at(i, c) * p + donor[c] * pc;
  }
  return FeatureMatrix(v.rows(), v.cols(), std::move(out));
}

/// Supplies the replacement row for a swap candidate.
class DonorFeatures {
 public:
  virtual ~DonorFeatures() = default;
  /// nullopt when the donor has no feature row.
  virtual std::optional<std::vector<float>> feature_for(const SwapCandidate& c, const std::string& image_id) const = 0;
};

/// Donor rows are the donor object's matched detection row in its own
/// image's feature file.
class DetectorDonors : public DonorFeatures {
 public:
  explicit DetectorDonors(const DatasetBundle& bundle) : bundle_(&bundle) {}

  std::optional<std::vector<float>> feature_for(const SwapCandidate& c, const std::string&) const override {
    auto ff = bundle_->features.find(c.donor.image_id);
    auto mt = bundle_->matches.find(c.donor.image_id);
    if (ff == bundle_->features.end() || mt == bundle_->matches.end()) return std::nullopt;
    auto row = mt->second.detection_of(c.donor.object_id);
    if (!row) return std::nullopt;
    auto r = ff->second.features.row(*row);
    return std::vector<float>(r.begin(), r.end());
  }

 private:
  const DatasetBundle* bundle_;
};

/// Donor rows are encodings of the swapped annotation: donor class and
/// attributes at the source object's box.
class PerfectSightDonors : public DonorFeatures {
 public:
  PerfectSightDonors(const DatasetBundle& bundle, const Encoder& encoder) : bundle_(&bundle), encoder_(&encoder) {}

  std::optional<std::vector<float>> feature_for(const SwapCandidate& c, const std::string& image_id) const override {
    const SceneGraph& g = bundle_->graph(image_id);
    auto src = source_annotation(*bundle_, image_id, c.source_detection_index);
    if (!src) return std::nullopt;
    return encoder_->encode(c.donor_class, c.donor_attributes, src->bbox, g.width, g.height);
  }

 private:
  const DatasetBundle* bundle_;
  const Encoder* encoder_;
};

struct PerturbationRecord {
  std::string question_id;
  int pert_id = 0;
  std::size_t detection_index = 0;
  SwapKind kind = SwapKind::class_swap;
  ObjectRef donor;
  std::vector<float> donor_feature;
};

struct PerturbationSkip {
  std::string question_id;
  int pert_id = 0;
  std::string reason;
};

/// Streams one perturbed matrix per planned swap, in pert_id order. Swaps
/// whose donor has no feature row are reported through `on_skip`.
inline void enumerate_perturbations(
    const FeatureMatrix& v, const std::string& image_id, const std::vector<PlannedSwap>& plan,
    const DonorFeatures& donors,
    const std::function<void(const PerturbationRecord&, const FeatureMatrix&)>& on_perturbation,
    const std::function<void(const PerturbationSkip&)>& on_skip = {}) {
  for (const auto& p : plan) {
    const auto& c = p.candidate;
    auto feat = donors.feature_for(c, image_id);
    if (!feat) {
      if (on_skip)
        on_skip({p.question_id, p.pert_id,
                 "DonorUnmatched: " + c.donor.image_id + "/" + c.donor.object_id + " has no feature row"});
      continue;
    }
    PerturbationRecord rec{p.question_id, p.pert_id, c.source_detection_index, c.kind, c.donor, std::move(*feat)};
    const FeatureMatrix out = apply_swap(v, rec.detection_index, rec.donor_feature);
    on_perturbation(rec, out);
  }
}

struct MaterializedPerturbation {
  PerturbationRecord record;
  FeatureMatrix features;
};

inline std::vector<MaterializedPerturbation> materialize_perturbations(const FeatureMatrix& v,
                                                                       const std::string& image_id,
                                                                       const std::vector<PlannedSwap>& plan,
                                                                       const DonorFeatures& donors,
                                                                       std::vector<PerturbationSkip>* skipped = nullptr) {
  std::vector<MaterializedPerturbation> out;
  enumerate_perturbations(
      v, image_id, plan, donors,
      [&](const PerturbationRecord& r, const FeatureMatrix& m) { out.push_back({r, m}); },
      [&](const PerturbationSkip& s) {
        if (skipped) skipped->push_back(s);
      });
  return out;
}

}  // namespace swapmix
