#include "cgrom/types.hpp"

#include <cmath>
#include <cstdio>

namespace cgrom {

void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

ParamVector::ParamVector(std::initializer_list<double> values)
    : values_(static_cast<Index>(values.size())) {
  Index i = 0;
  for (double v : values) values_[i++] = v;
  require(values_.allFinite(), "ParamVector entries must be finite");
}

ParamVector::ParamVector(Vector values) : values_(std::move(values)) {
  require(values_.allFinite(), "ParamVector entries must be finite");
}

ParamVector::ParamVector(const std::vector<double>& values)
    : values_(Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()))) {
  require(values_.allFinite(), "ParamVector entries must be finite");
}

std::string ParamVector::to_string() const {
  std::string out = "(";
  char buf[32];
  for (Index i = 0; i < size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%g", values_[i]);
    if (i > 0) out += ",";
    out += buf;
  }
  return out + ")";
}

FieldLayout::FieldLayout(std::vector<Field> fields) : fields_(std::move(fields)) {
  require(!fields_.empty(), "FieldLayout: at least one field is required");
  Index next = 0;
  for (const Field& f : fields_) {
    require(f.offset == next, "FieldLayout: fields must be contiguous and ordered");
    require(f.length >= 2, "FieldLayout: every field needs at least two entries");
    next += f.length;
  }
}

FieldLayout FieldLayout::single(Index dim, std::string name) {
  return FieldLayout({{std::move(name), 0, dim}});
}

FieldLayout FieldLayout::uniform(std::vector<std::string> names, Index length) {
  std::vector<Field> fields;
  Index offset = 0;
  for (auto& n : names) {
    fields.push_back({std::move(n), offset, length});
    offset += length;
  }
  return FieldLayout(std::move(fields));
}

Index FieldLayout::dim() const noexcept {
  return fields_.empty() ? 0 : fields_.back().offset + fields_.back().length;
}

}  // namespace cgrom
