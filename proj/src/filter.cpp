#include "pathflow/filter.hpp"

#include <algorithm>

#include "pathflow/errors.hpp"

namespace pathflow {

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::ne: return "!=";
    case CompareOp::le: return "<=";
    case CompareOp::ge: return ">=";
    case CompareOp::in_set: return "in";
    case CompareOp::in_range: return "range";
  }
  return "=";
}

std::optional<CompareOp> parse_compare_op(std::string_view text) {
  if (text == "=") return CompareOp::eq;
  if (text == "!=") return CompareOp::ne;
  if (text == "<=") return CompareOp::le;
  if (text == ">=") return CompareOp::ge;
  if (text == "in") return CompareOp::in_set;
  if (text == "range") return CompareOp::in_range;
  return std::nullopt;
}

bool AttributePredicate::test(AttrValue value) const noexcept {
  switch (op) {
    case CompareOp::eq: return value == operands[0];
    case CompareOp::ne: return value != operands[0];
    case CompareOp::le: return value <= operands[0];
    case CompareOp::ge: return value >= operands[0];
    case CompareOp::in_set: return std::find(operands.begin(), operands.end(), value) != operands.end();
    case CompareOp::in_range: return operands[0] <= value && value <= operands[1];
  }
  return false;
}

std::vector<Violation> validate_filter(const FilterSpec& spec, const DatasetManifest& manifest) {
  std::vector<Violation> out;
  for (const auto& pred : spec.attributes) {
    if (pred.attr >= manifest.attributes.size()) {
      out.push_back({"unknown-attribute", std::to_string(pred.attr), "filter references an undeclared attribute"});
      continue;
    }
    const auto& attr = manifest.attributes[pred.attr];
    const std::size_t n = pred.operands.size();
    const bool arity_ok = pred.op == CompareOp::in_set     ? n >= 1
                          : pred.op == CompareOp::in_range ? n == 2
                                                           : n == 1;
    if (!arity_ok) {
      out.push_back({"bad-operands", attr.name,
                     "operator " + std::string(to_string(pred.op)) + " got " + std::to_string(n) + " operands"});
      continue;
    }
    if (pred.op == CompareOp::in_range && pred.operands[0] > pred.operands[1]) {
      out.push_back({"bad-range", attr.name, "range low exceeds high"});
    }
    if (attr.kind == AttributeKind::categorical &&
        (pred.op == CompareOp::eq || pred.op == CompareOp::ne || pred.op == CompareOp::in_set)) {
      for (AttrValue v : pred.operands) {
        if (v < 0 || static_cast<std::size_t>(v) >= attr.categories.size()) {
          out.push_back({"unknown-category", attr.name, "category index " + std::to_string(v) + " out of range"});
        }
      }
    }
  }
  if (spec.sequence_length && spec.sequence_length->min > spec.sequence_length->max) {
    out.push_back({"bad-length", "sequence_length", "min exceeds max"});
  }
  for (TypeId t : spec.hidden_types) {
    if (!manifest.catalog.contains(t)) {
      out.push_back({"unknown-type", std::to_string(t), "hidden type is not in the catalog"});
    }
  }
  if (spec.alignment && !manifest.catalog.contains(spec.alignment->type)) {
    out.push_back({"unknown-type", std::to_string(spec.alignment->type), "alignment type is not in the catalog"});
  }
  return out;
}

namespace {

void throw_if_invalid(const FilterSpec& spec, const DatasetManifest& manifest) {
  const auto violations = validate_filter(spec, manifest);
  if (violations.empty()) return;
  std::string message = "invalid filter:";
  for (const auto& v : violations) message += " " + v.code + "[" + v.subject + "]";
  throw QueryError(message);
}

bool attributes_pass(const std::vector<AttributePredicate>& preds, std::span<const AttrValue> attributes) {
  for (const auto& pred : preds) {
    if (pred.attr >= attributes.size() || !pred.test(attributes[pred.attr])) return false;
  }
  return true;
}

}  // namespace

bool align_and_bound(std::vector<HighEvent>& events, const FilterSpec& spec) {
  if (spec.alignment) {
    const TypeId target = spec.alignment->type;
    auto it = std::find_if(events.begin(), events.end(), [&](const HighEvent& e) { return e.type == target; });
    if (it == events.end()) return false;
    if (spec.alignment->direction == AlignDirection::after) {
      events.erase(events.begin(), it);
    } else {
      events.erase(it + 1, events.end());
      std::reverse(events.begin(), events.end());
    }
  }
  if (spec.sequence_length) {
    const std::size_t n = events.size();
    if (n < spec.sequence_length->min || n > spec.sequence_length->max) return false;
  }
  return true;
}

std::optional<PatientSequence> admit(const PatientSequence& seq, const FilterSpec& spec,
                                     const DatasetManifest& manifest) {
  throw_if_invalid(spec, manifest);
  if (!attributes_pass(spec.attributes, seq.attributes)) return std::nullopt;

  PatientSequence out{seq.id, seq.attributes, {}};
  out.events.reserve(seq.events.size());
  for (const auto& e : seq.events) {
    const bool hidden = std::any_of(spec.hidden_types.begin(), spec.hidden_types.end(),
                                    [&](TypeId h) { return manifest.catalog.is_ancestor_or_self(h, e.type); });
    if (hidden) continue;
    append_merging(out.events, e, manifest.gap_for(e.type));
  }
  if (!align_and_bound(out.events, spec)) return std::nullopt;
  return out;
}

PatientPipeline::PatientPipeline(const DatasetManifest& manifest, const FilterSpec& spec)
    : spec_((throw_if_invalid(spec, manifest), spec)),
      mapping_(manifest, spec.abstraction_level, spec.hidden_types) {}

bool PatientPipeline::passes_attributes(std::span<const AttrValue> attributes) const noexcept {
  return attributes_pass(spec_.attributes, attributes);
}

bool PatientPipeline::run(const RawPatient& raw, PatientSequence& out) const {
  if (!passes_attributes(raw.attributes)) return false;
  aggregate_into(raw, mapping_, out);
  return align_and_bound(out.events, spec_);
}

}  // namespace pathflow
