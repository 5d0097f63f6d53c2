#include "jigsaw/cost/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "jigsaw/csvio.hpp"
#include "jigsaw/errors.hpp"

namespace jigsaw::cost {

std::int64_t TaskDemand::duration_us() const {
  return static_cast<std::int64_t>(std::llround(duration_ms * 1000.0));
}

void ProfileEntry::validate() const {
  if (knots.empty()) throw ConfigError("profile " + model_name + ": no knots");
  double prev_fraction = 0.0, prev_backward = -1.0, prev_mem = -1.0;
  for (const auto& k : knots) {
    if (k.fraction <= prev_fraction || k.fraction > 1.0)
      throw ConfigError("profile " + model_name + ": fractions must be strictly increasing in (0,1]");
    if (k.forward_ms <= 0.0) throw ConfigError("profile " + model_name + ": forward_ms must be > 0");
    if (k.backward_ms < prev_backward || k.peak_mem_gb < prev_mem)
      throw ConfigError("profile " + model_name + ": backward_ms and peak_mem_gb must be nondecreasing");
    prev_fraction = k.fraction;
    prev_backward = k.backward_ms;
    prev_mem = k.peak_mem_gb;
  }
  if (grad_size_mb <= 0.0) throw ConfigError("profile " + model_name + ": grad_size_mb must be > 0");
  if (compute_fraction <= 0.0 || compute_fraction > 1.0)
    throw ConfigError("profile " + model_name + ": compute_fraction must be in (0,1]");
}

namespace {

enum class Extrapolate { ThroughZero, Floor, Constant };

double interp(const ProfileEntry& entry, double fraction, double ProfileEntry::Knot::*field,
              Extrapolate below) {
  if (entry.knots.empty()) throw ConfigError("empty profile");
  if (fraction <= 0.0 || fraction > 1.0) throw ArgumentError("fraction must be in (0,1]");
  const auto& ks = entry.knots;
  if (fraction <= ks.front().fraction) {
    const auto& k0 = ks.front();
    if (fraction == k0.fraction) return k0.*field;
    switch (below) {
      case Extrapolate::ThroughZero:
        return (k0.*field) * fraction / k0.fraction;
      case Extrapolate::Floor:
      case Extrapolate::Constant:
        return k0.*field;
    }
  }
  for (size_t i = 1; i < ks.size(); ++i) {
    if (fraction <= ks[i].fraction) {
      if (fraction == ks[i].fraction) return ks[i].*field;
      double t = (fraction - ks[i - 1].fraction) / (ks[i].fraction - ks[i - 1].fraction);
      return ks[i - 1].*field + t * (ks[i].*field - ks[i - 1].*field);
    }
  }
  return ks.back().*field;
}

}  // namespace

double forward_time(const ProfileEntry& entry, double fraction) {
  return interp(entry, fraction, &ProfileEntry::Knot::forward_ms, Extrapolate::Constant);
}

double backward_time(const ProfileEntry& entry, double fraction) {
  return interp(entry, fraction, &ProfileEntry::Knot::backward_ms, Extrapolate::ThroughZero);
}

double peak_memory(const ProfileEntry& entry, double fraction) {
  return interp(entry, fraction, &ProfileEntry::Knot::peak_mem_gb, Extrapolate::Floor);
}

TaskDemand task_demand(const ProfileEntry& entry, double fraction, double comm_ms_per_mb) {
  TaskDemand d;
  d.comm_mb = entry.grad_size_mb * fraction;
  d.duration_ms = forward_time(entry, fraction) + backward_time(entry, fraction) +
                  comm_ms_per_mb * d.comm_mb;
  d.peak_mem_gb = peak_memory(entry, fraction);
  d.compute_fraction = entry.compute_fraction;
  return d;
}

TaskDemand task_demand(const ProfileEntry& entry, int j, int k, double comm_ms_per_mb) {
  if (k < 1 || j < 1 || j > k) throw ArgumentError("task_demand: worker index out of range");
  return task_demand(entry, static_cast<double>(j) / static_cast<double>(k), comm_ms_per_mb);
}

ProfileEntry scaled_profile(const ProfileEntry& base, const std::string& name,
                            double grad_size_mb) {
  if (grad_size_mb <= 0.0) throw ArgumentError("scaled_profile: grad_size_mb must be > 0");
  double ratio = grad_size_mb / base.grad_size_mb;
  ProfileEntry out = base;
  out.model_name = name;
  out.grad_size_mb = grad_size_mb;
  for (auto& k : out.knots) {
    k.forward_ms *= ratio;
    k.backward_ms *= ratio;
    k.peak_mem_gb *= ratio;
  }
  out.validate();
  return out;
}

ProfileTable ProfileTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_csv(text.str(), path);
}

ProfileTable ProfileTable::from_csv(const std::string& csv_text, const std::string& origin) {
  std::istringstream in(csv_text);
  std::string line;
  std::vector<std::string> header;
  ProfileTable table;
  std::map<std::string, ProfileEntry> pending;
  std::vector<std::string> order;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    auto fields = csv::split_line(line);
    if (header.empty()) {
      header = fields;
      const std::vector<std::string> expected = {"model",       "fraction",     "forward_ms",
                                                 "backward_ms", "peak_mem_gb", "grad_size_mb",
                                                 "batch"};
      if (header != expected)
        throw ConfigError(origin + ": unexpected profile header");
      continue;
    }
    if (fields.size() != 7)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 7 fields");
    try {
      const std::string& model = fields[0];
      ProfileEntry::Knot knot{std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3]),
                              std::stod(fields[4])};
      double grad = std::stod(fields[5]);
      int batch = std::stoi(fields[6]);
      auto [it, inserted] = pending.try_emplace(model);
      if (inserted) {
        it->second.model_name = model;
        it->second.grad_size_mb = grad;
        it->second.batch_size = batch;
        order.push_back(model);
      } else if (it->second.grad_size_mb != grad || it->second.batch_size != batch) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": grad_size_mb/batch differ across rows of " + model);
      }
      it->second.knots.push_back(knot);
    } catch (const std::invalid_argument&) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed numeric field");
    }
  }
  if (pending.empty()) throw ConfigError(origin + ": no profiles");
  for (const auto& name : order) {
    auto entry = pending[name];
    std::sort(entry.knots.begin(), entry.knots.end(),
              [](const auto& a, const auto& b) { return a.fraction < b.fraction; });
    entry.validate();
    table.add(std::move(entry));
  }
  return table;
}

const ProfileEntry& ProfileTable::get(const std::string& model) const {
  auto it = entries_.find(model);
  if (it == entries_.end()) throw ConfigError("unknown model: " + model);
  return it->second;
}

bool ProfileTable::contains(const std::string& model) const { return entries_.count(model) > 0; }

std::vector<std::string> ProfileTable::model_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) names.push_back(name);
  return names;
}

void ProfileTable::add(ProfileEntry entry) {
  entry.validate();
  entries_[entry.model_name] = std::move(entry);
}

}  // namespace jigsaw::cost
