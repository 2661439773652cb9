#include "xalign/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "xalign/csv.hpp"
#include "xalign/errors.hpp"

namespace xalign {

BinnedSpectrum bin_events(const PhotonEventList& events, BinSpacing spacing) {
  if (!(events.exposure_s > 0.0))
    throw parameter_error("bin_events: exposure_time must be positive");

  BinnedSpectrum out;
  out.spectrum.bins.assign(kSpectrumBins, 0.0);
  out.empty_input = events.energies_kev.empty();

  std::vector<size_t> counts(kSpectrumBins, 0);
  const double log_lo = std::log(kEnergyLoKev);
  const double log_hi = std::log(kEnergyHiKev);
  for (const double e : events.energies_kev) {
    if (!(e >= kEnergyLoKev && e <= kEnergyHiKev)) {
      ++out.discarded_events;
      continue;
    }
    size_t idx;
    if (spacing == BinSpacing::Linear) {
      idx = static_cast<size_t>((e - kEnergyLoKev) / (kEnergyHiKev - kEnergyLoKev) *
                                static_cast<double>(kSpectrumBins));
    } else {
      idx = static_cast<size_t>((std::log(e) - log_lo) / (log_hi - log_lo) *
                                static_cast<double>(kSpectrumBins));
    }
    if (idx >= kSpectrumBins) idx = kSpectrumBins - 1;  // e == 8.0 lands here
    ++counts[idx];
  }

  if (spacing == BinSpacing::Linear) {
    const double width = (kEnergyHiKev - kEnergyLoKev) / static_cast<double>(kSpectrumBins);
    for (size_t b = 0; b < kSpectrumBins; ++b)
      out.spectrum.bins[b] =
          static_cast<double>(counts[b]) / (events.exposure_s * width);
  } else {
    for (size_t b = 0; b < kSpectrumBins; ++b) {
      const double lo = std::exp(log_lo + (log_hi - log_lo) * b / kSpectrumBins);
      const double hi = std::exp(log_lo + (log_hi - log_lo) * (b + 1) / kSpectrumBins);
      out.spectrum.bins[b] = static_cast<double>(counts[b]) / (events.exposure_s * (hi - lo));
    }
  }
  return out;
}

NormalizedSpectrum minmax_normalize(const Spectrum& s) {
  if (s.bins.size() != kSpectrumBins)
    throw shape_error("minmax_normalize: expected " + std::to_string(kSpectrumBins) +
                      " bins, got " + std::to_string(s.bins.size()));
  require_finite(s.bins, "minmax_normalize");

  const auto [mn_it, mx_it] = std::minmax_element(s.bins.begin(), s.bins.end());
  const double mn = *mn_it, mx = *mx_it;
  NormalizedSpectrum out;
  if (mx == mn) {
    out.bins.assign(kSpectrumBins, 0.0);
    out.degenerate = true;
    return out;
  }
  out.bins.resize(kSpectrumBins);
  const double inv = 1.0 / (mx - mn);
  for (size_t i = 0; i < kSpectrumBins; ++i) out.bins[i] = (s.bins[i] - mn) * inv;
  return out;
}

SpectrumTable read_spectra_csv(const std::filesystem::path& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields.empty() || fields[0] != "source_id")
    throw format_error(path.string() + ": expected header 'source_id,b0,...,b399'");
  if (fields.size() != kSpectrumBins + 1)
    throw format_error(path.string() + ": expected " + std::to_string(kSpectrumBins + 1) +
                       " header columns, got " + std::to_string(fields.size()));

  SpectrumTable table;
  std::vector<double> data;
  while (reader.next(fields)) {
    if (fields.size() != kSpectrumBins + 1)
      throw shape_error(path.string() + ":" + std::to_string(reader.line()) + ": row has " +
                        std::to_string(fields.size() - 1) + " bins, expected " +
                        std::to_string(kSpectrumBins));
    table.ids.push_back(fields[0]);
    for (size_t c = 1; c < fields.size(); ++c) {
      const double v = parse_double_field(fields[c], path.string(), reader.line());
      if (!std::isfinite(v))
        throw numeric_error(path.string() + ":" + std::to_string(reader.line()) +
                            ": non-finite bin value");
      data.push_back(v);
    }
  }
  table.bins.rows = table.ids.size();
  table.bins.cols = kSpectrumBins;
  table.bins.data = std::move(data);
  return table;
}

void write_spectra_csv(const std::filesystem::path& path, const SpectrumTable& table) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "source_id";
  for (size_t b = 0; b < kSpectrumBins; ++b) out << ",b" << b;
  out << '\n';
  for (size_t r = 0; r < table.bins.rows; ++r) {
    out << table.ids[r];
    const double* row = table.bins.row(r);
    for (size_t b = 0; b < kSpectrumBins; ++b) out << ',' << format_double(row[b]);
    out << '\n';
  }
  if (!out) throw io_error("write failure in " + path.string());
}

EventSet read_events_csv(const std::filesystem::path& events_path,
                         const std::filesystem::path& exposures_path) {
  std::unordered_map<std::string, double> exposures;
  {
    CsvReader reader(exposures_path);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields.size() != 2 || fields[0] != "source_id" ||
        fields[1] != "exposure_s")
      throw format_error(exposures_path.string() + ": expected header 'source_id,exposure_s'");
    while (reader.next(fields)) {
      if (fields.size() != 2)
        throw format_error(exposures_path.string() + ":" + std::to_string(reader.line()) +
                           ": expected 2 fields");
      const double exp_s = parse_double_field(fields[1], exposures_path.string(), reader.line());
      if (!(exp_s > 0))
        throw format_error(exposures_path.string() + ":" + std::to_string(reader.line()) +
                           ": exposure must be positive");
      if (!exposures.emplace(fields[0], exp_s).second)
        throw validation_error(exposures_path.string() + ":" + std::to_string(reader.line()) +
                               ": duplicate id '" + fields[0] + "'");
    }
  }

  EventSet set;
  std::unordered_map<std::string, size_t> index;
  CsvReader reader(events_path);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields.size() != 2 || fields[0] != "source_id" ||
      fields[1] != "energy_kev")
    throw format_error(events_path.string() + ": expected header 'source_id,energy_kev'");
  while (reader.next(fields)) {
    if (fields.size() != 2)
      throw format_error(events_path.string() + ":" + std::to_string(reader.line()) +
                         ": expected 2 fields");
    const auto exp_it = exposures.find(fields[0]);
    if (exp_it == exposures.end())
      throw validation_error(events_path.string() + ":" + std::to_string(reader.line()) +
                             ": id '" + fields[0] + "' has no exposure entry");
    auto [it, fresh] = index.emplace(fields[0], set.ids.size());
    if (fresh) {
      set.ids.push_back(fields[0]);
      set.events.push_back({{}, exp_it->second});
    }
    set.events[it->second].energies_kev.push_back(
        parse_double_field(fields[1], events_path.string(), reader.line()));
  }
  return set;
}

}  // namespace xalign
