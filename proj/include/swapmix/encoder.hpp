#pragma once

// Perfect-sight encodings: each object becomes the average of a class term,
// an attribute term and a box term, each a fixed linear projection to d.
//
//   o = P_class * embed(class)
//   a = P_attr  * mean(embed(attr) for attr in attributes)   (0 if none)
//   b = P_box   * (x1/W, y1/H, x2/W, y2/H)
//   c = (o + a + b) / 3
//
// Projection entries are uniform on [-sqrt(3), sqrt(3)) (unit variance),
// scaled by 1/sqrt(input dimension), drawn from three independent seeds.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "swapmix/bundle.hpp"
#include "swapmix/embedding.hpp"
#include "swapmix/random.hpp"
#include "swapmix/swapplan.hpp"

namespace swapmix {

struct EncoderConfig {
  std::size_t d = 16;
  std::uint64_t class_seed = 1;
  std::uint64_t attribute_seed = 2;
  std::uint64_t bbox_seed = 3;
  bool allow_fallback = true;

  static EncoderConfig from_run_seed(std::size_t d, std::uint64_t seed) {
    return {d, derive_seed(seed, {"encoder", "class"}), derive_seed(seed, {"encoder", "attribute"}),
            derive_seed(seed, {"encoder", "bbox"}), true};
  }
};

/// Row-major out x in matrix with seeded unit-variance entries.
class Projection {
 public:
  Projection() = default;
  Projection(std::size_t out, std::size_t in, std::uint64_t seed) : out_(out), in_(in), w_(out * in) {
    Rng rng(seed);
    const double scale = std::sqrt(3.0) / std::sqrt(static_cast<double>(in));
    for (auto& x : w_) x = (rng.uniform() * 2.0 - 1.0) * scale;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    if (x.size() != in_) throw Error(ErrorKind::DimensionMismatch, "projection input dimension");
    std::vector<double> y(out_, 0.0);
    for (std::size_t i = 0; i < out_; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < in_; ++j) s += w_[i * in_ + j] * x[j];
      y[i] = s;
    }
    return y;
  }

  double weight(std::size_t i, std::size_t j) const { return w_[i * in_ + j]; }

 private:
  std::size_t out_ = 0, in_ = 0;
  std::vector<double> w_;
};

struct EncodingParts {
  std::vector<double> class_term;
  std::vector<double> attribute_term;
  std::vector<double> bbox_term;
};

class Encoder {
 public:
  Encoder(EncoderConfig cfg, const EmbeddingTable& table)
      : cfg_(cfg),
        table_(&table),
        class_proj_(cfg.d, table.dimension(), cfg.class_seed),
        attr_proj_(cfg.d, table.dimension(), cfg.attribute_seed),
        bbox_proj_(cfg.d, 4, cfg.bbox_seed) {
    if (cfg.d < 1) throw Error(ErrorKind::InvalidArgument, "encoder dimension must be >= 1");
  }

  const EncoderConfig& config() const { return cfg_; }
  std::size_t dimension() const { return cfg_.d; }

  EncodingParts encode_parts(const std::string& class_label, const AttributeSet& attributes,
                             const BoundingBox& box, double width, double height) const {
    EncodingParts p;
    p.class_term = class_proj_.apply(embed(class_label));
    if (attributes.empty()) {
      p.attribute_term.assign(cfg_.d, 0.0);
    } else {
      std::vector<double> mean(table_->dimension(), 0.0);
      for (const auto& a : attributes) {
        const auto v = table_->lookup(a, cfg_.allow_fallback);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
      }
      for (auto& x : mean) x /= static_cast<double>(attributes.size());
      p.attribute_term = attr_proj_.apply(mean);
    }
    const double w = width > 0 ? width : 1.0;
    const double h = height > 0 ? height : 1.0;
    p.bbox_term = bbox_proj_.apply({box.x1 / w, box.y1 / h, box.x2 / w, box.y2 / h});
    return p;
  }

  static std::vector<float> combine(const EncodingParts& p) {
    std::vector<float> out(p.class_term.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<float>((p.class_term[i] + p.attribute_term[i] + p.bbox_term[i]) / 3.0);
    return out;
  }

  std::vector<float> encode(const std::string& class_label, const AttributeSet& attributes,
                            const BoundingBox& box, double width, double height) const {
    return combine(encode_parts(class_label, attributes, box, width, height));
  }

  std::vector<float> encode_object(const ObjectAnnotation& ann, double width, double height) const {
    return encode(ann.class_label, ann.attributes, ann.bbox, width, height);
  }

  /// Class swap: donor_class with the attributes of a seeded-random real
  /// object of that class; the source box is kept.
  std::vector<float> swap_class_encoding(const ObjectAnnotation& ann, const std::string& donor_class,
                                         const DatasetBundle& bundle, std::uint64_t seed, double width,
                                         double height) const {
    auto it = bundle.class_index.find(donor_class);
    if (it == bundle.class_index.end() || it->second.empty())
      throw Error(ErrorKind::EmptyClass, "no object of class '" + donor_class + "' in the dataset");
    Rng rng(seed);
    const ObjectRef& donor = it->second[rng.below(it->second.size())];
    return encode(donor_class, bundle.object(donor)->attributes, ann.bbox, width, height);
  }

  /// Attribute swap: the canonical attribute is replaced by new_attribute.
  std::vector<float> swap_attribute_encoding(const ObjectAnnotation& ann, const std::string& new_attribute,
                                             double width, double height) const {
    if (ann.attributes.empty())
      throw Error(ErrorKind::InvalidArgument, "object " + ann.object_id + " has no attribute to replace");
    if (*ann.attributes.begin() == new_attribute)
      throw Error(ErrorKind::InvalidArgument, "replacement attribute equals the replaced one");
    return encode(ann.class_label, replace_canonical_attribute(ann.attributes, new_attribute), ann.bbox,
                  width, height);
  }

  /// Perfect-sight feature file for a scene graph, one row per object.
  FeatureFile encode_graph(const SceneGraph& g) const {
    std::vector<std::vector<float>> rows;
    for (const auto& o : g.objects) rows.push_back(encode_object(o, g.width, g.height));
    return {FeatureMatrix::from_rows(rows), detections_from_annotations(g)};
  }

 private:
  std::vector<double> embed(const std::string& token) const {
    const auto v = table_->lookup(token, cfg_.allow_fallback);
    return {v.begin(), v.end()};
  }

  EncoderConfig cfg_;
  const EmbeddingTable* table_;
  Projection class_proj_;
  Projection attr_proj_;
  Projection bbox_proj_;
};

}  // namespace swapmix
