#include "ger/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ger/data_model.hpp"

namespace ger {

using nlohmann::json;

namespace {

// Percentages are stored at 1e-4 so the JSON text does not depend on the last
// bits of a division.
json pct(std::optional<double> v) {
  if (!v) return nullptr;
  return std::round(*v * 1e4) / 1e4;
}

std::optional<double> opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json counts_json(const TypeCounts& c, const PrecisionRecall& pr) {
  return {{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp},
          {"precision", pct(pr.precision)}, {"recall", pct(pr.recall)}};
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

void metadata_rows(std::ostringstream& out, const json& j, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      metadata_rows(out, *it, key);
    } else {
      out << "| " << md_cell(key) << " | "
          << md_cell(it->is_string() ? it->get<std::string>() : it->dump()) << " |\n";
    }
  }
}

}  // namespace

std::string format_pct(std::optional<double> v) { return v ? fixed(*v, 1) : "-"; }

json to_json(const Report& r) {
  json systems = json::array();
  for (const auto& s : r.systems) {
    json edits;
    for (auto t : kErrorTypes)
      edits[to_string(t)] =
          counts_json(s.edits[t], s.edit_metrics.by_type[static_cast<std::size_t>(t)]);
    edits["Total"] = counts_json(s.edits.total(), s.edit_metrics.total);
    systems.push_back({
        {"system", s.system},
        {"wer",
         {{"percent", pct(s.wer.percent)},
          {"errors", s.wer.errors},
          {"ref_tokens", s.wer.ref_tokens},
          {"sub", s.wer.sub},
          {"del", s.wer.del},
          {"ins", s.wer.ins},
          {"utterances", s.wer.utterances},
          {"empty_references", s.wer.empty_references}}},
        {"sentences",
         {{"improved", s.categories.improved},
          {"degraded", s.categories.degraded},
          {"unchanged", s.categories.unchanged},
          {"improved_pct", pct(s.categories.improved_pct)},
          {"degraded_pct", pct(s.categories.degraded_pct)},
          {"unchanged_pct", pct(s.categories.unchanged_pct)}}},
        {"edits", std::move(edits)},
    });
  }
  return {{"metadata", r.metadata}, {"systems", std::move(systems)}};
}

Report report_from_json(const json& j) {
  Report r;
  r.metadata = j.at("metadata");
  for (const auto& s : j.at("systems")) {
    ExperimentSummary e;
    e.system = s.at("system").get<std::string>();
    const auto& w = s.at("wer");
    e.wer.percent = w.at("percent").get<double>();
    e.wer.errors = w.at("errors").get<std::size_t>();
    e.wer.ref_tokens = w.at("ref_tokens").get<std::size_t>();
    e.wer.sub = w.at("sub").get<std::size_t>();
    e.wer.del = w.at("del").get<std::size_t>();
    e.wer.ins = w.at("ins").get<std::size_t>();
    e.wer.utterances = w.at("utterances").get<std::size_t>();
    e.wer.empty_references = w.at("empty_references").get<std::size_t>();
    const auto& c = s.at("sentences");
    e.categories.improved = c.at("improved").get<std::size_t>();
    e.categories.degraded = c.at("degraded").get<std::size_t>();
    e.categories.unchanged = c.at("unchanged").get<std::size_t>();
    e.categories.improved_pct = c.at("improved_pct").get<double>();
    e.categories.degraded_pct = c.at("degraded_pct").get<double>();
    e.categories.unchanged_pct = c.at("unchanged_pct").get<double>();
    const auto& ed = s.at("edits");
    for (auto t : kErrorTypes) {
      const auto& row = ed.at(to_string(t));
      e.edits[t] = {row.at("tp").get<std::size_t>(), row.at("fn").get<std::size_t>(),
                    row.at("fp").get<std::size_t>()};
      e.edit_metrics.by_type[static_cast<std::size_t>(t)] = {opt(row.at("precision")),
                                                             opt(row.at("recall"))};
    }
    const auto& tot = ed.at("Total");
    e.edit_metrics.total = {opt(tot.at("precision")), opt(tot.at("recall"))};
    r.systems.push_back(std::move(e));
  }
  return r;
}

std::string render_markdown(const Report& r) {
  std::ostringstream out;
  out << "# Error correction evaluation\n\n";

  out << "## Word error rate\n\n";
  out << "| System | WER (%) | Errors | Ref. tokens | S | D | I |\n";
  out << "|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& s : r.systems)
    out << "| " << md_cell(s.system) << " | " << fixed(s.wer.percent, 1) << " | " << s.wer.errors
        << " | " << s.wer.ref_tokens << " | " << s.wer.sub << " | " << s.wer.del << " | "
        << s.wer.ins << " |\n";

  out << "\n## Sentence-level changes against the baseline\n\n";
  out << "| System | Improved (%) | Degraded (%) | Unchanged (%) | Improved | Degraded | Unchanged |\n";
  out << "|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& s : r.systems) {
    const auto& c = s.categories;
    out << "| " << md_cell(s.system) << " | " << fixed(c.improved_pct, 1) << " | "
        << fixed(c.degraded_pct, 1) << " | " << fixed(c.unchanged_pct, 1) << " | " << c.improved
        << " | " << c.degraded << " | " << c.unchanged << " |\n";
  }

  out << "\n## Edit-level corrections\n\n";
  out << "| System | Type | TP | FN | FP | Prec. | Rec. |\n";
  out << "|---|---|---:|---:|---:|---:|---:|\n";
  for (const auto& s : r.systems) {
    for (auto t : kErrorTypes) {
      const auto& c = s.edits[t];
      const auto& pr = s.edit_metrics.by_type[static_cast<std::size_t>(t)];
      out << "| " << md_cell(s.system) << " | " << to_string(t) << " | " << c.tp << " | " << c.fn
          << " | " << c.fp << " | " << format_pct(pr.precision) << " | " << format_pct(pr.recall)
          << " |\n";
    }
    const auto c = s.edits.total();
    out << "| " << md_cell(s.system) << " | Total | " << c.tp << " | " << c.fn << " | " << c.fp
        << " | " << format_pct(s.edit_metrics.total.precision) << " | "
        << format_pct(s.edit_metrics.total.recall) << " |\n";
  }

  out << "\n## Metadata\n\n| Key | Value |\n|---|---|\n";
  metadata_rows(out, r.metadata, "");
  return out.str();
}

std::string render_wer_csv(const Report& r) {
  std::ostringstream out;
  out << "system,wer_percent,errors,ref_tokens,sub,del,ins,utterances,empty_references\n";
  for (const auto& s : r.systems)
    out << csv_field(s.system) << ',' << fixed(s.wer.percent, 4) << ',' << s.wer.errors << ','
        << s.wer.ref_tokens << ',' << s.wer.sub << ',' << s.wer.del << ',' << s.wer.ins << ','
        << s.wer.utterances << ',' << s.wer.empty_references << '\n';
  return out.str();
}

std::string render_sentence_csv(const Report& r) {
  std::ostringstream out;
  out << "system,improved,degraded,unchanged,improved_pct,degraded_pct,unchanged_pct\n";
  for (const auto& s : r.systems) {
    const auto& c = s.categories;
    out << csv_field(s.system) << ',' << c.improved << ',' << c.degraded << ',' << c.unchanged
        << ',' << fixed(c.improved_pct, 4) << ',' << fixed(c.degraded_pct, 4) << ','
        << fixed(c.unchanged_pct, 4) << '\n';
  }
  return out.str();
}

std::string render_edit_csv(const Report& r) {
  std::ostringstream out;
  out << "system,type,tp,fn,fp,precision,recall\n";
  auto cell = [](std::optional<double> v) { return v ? fixed(*v, 4) : std::string(); };
  for (const auto& s : r.systems) {
    for (auto t : kErrorTypes) {
      const auto& c = s.edits[t];
      const auto& pr = s.edit_metrics.by_type[static_cast<std::size_t>(t)];
      out << csv_field(s.system) << ',' << to_string(t) << ',' << c.tp << ',' << c.fn << ','
          << c.fp << ',' << cell(pr.precision) << ',' << cell(pr.recall) << '\n';
    }
    const auto c = s.edits.total();
    out << csv_field(s.system) << ",Total," << c.tp << ',' << c.fn << ',' << c.fp << ','
        << cell(s.edit_metrics.total.precision) << ',' << cell(s.edit_metrics.total.recall)
        << '\n';
  }
  return out.str();
}

void write_report(const Report& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const json j = to_json(report);
  // Render from the stored values so `report` reproduces these files exactly.
  const Report r = report_from_json(j);
  write_file_atomic(out_dir / "report.json", j.dump(2) + "\n");
  write_file_atomic(out_dir / "report.md", render_markdown(r));
  write_file_atomic(out_dir / "wer.csv", render_wer_csv(r));
  write_file_atomic(out_dir / "sentences.csv", render_sentence_csv(r));
  write_file_atomic(out_dir / "edits.csv", render_edit_csv(r));
}

}  // namespace ger
