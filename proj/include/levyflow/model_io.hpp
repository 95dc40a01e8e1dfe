#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "levyflow/data.hpp"
#include "levyflow/flow.hpp"

namespace levyflow {

/// Named parameters of a base law, in declaration order.
std::vector<std::pair<std::string, double>> param_fields(const BaseParams& p);
/// Starts from the family defaults and overrides the named fields.
/// Unknown names throw InvalidParameter; the result is validated.
BaseParams params_from_fields(Family f, const std::map<std::string, double>& fields);

struct ModelDocument {
  FlowModel model;
  std::optional<Standardizer> standardizer;
};

/// Line-oriented text format, every number at round-trip precision:
///
///   levyflow-model 1
///   family vg
///   base mu 0 sigma 1 theta -0.2 nu 0.8
///   shape <layers> <bins> <bound>
///   layer <i> widths|heights|derivs <values...>
///   standardizer <mean> <scale> <fit_count>     (optional)
///   end
void write_model(std::ostream& os, const FlowModel& model, const std::optional<Standardizer>& s = std::nullopt);
ModelDocument read_model(std::istream& is);

void save_model(const std::filesystem::path& path, const FlowModel& model,
                const std::optional<Standardizer>& s = std::nullopt);
ModelDocument load_model(const std::filesystem::path& path);

}  // namespace levyflow
