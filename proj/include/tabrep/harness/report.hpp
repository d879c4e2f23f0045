#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tabrep/harness/run.hpp"

namespace tabrep::harness {

namespace detail {

inline std::string cell_text(const ReportCell& cell, bool highlight) {
    if (!cell.any_ok()) {
        std::string reason = cell.folds.empty() ? "no data" : cell.folds.front().reason;
        if (reason.size() > 40) reason = reason.substr(0, 37) + "...";
        return "—(" + reason + ")";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", cell.mean_rmse);
    std::string text = highlight ? "*" + std::string(buf) + "*" : std::string(buf);
    if (cell.folds_used > 1) {
        std::snprintf(buf, sizeof buf, " (%.2f)", cell.sd_rmse);
        text += buf;
    }
    return text;
}

inline std::string pad(const std::string& s, std::size_t width) {
    std::string out = s;
    // UTF-8 em dash counts as one display column
    std::size_t display = 0;
    for (char ch : s)
        if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++display;
    if (display < width) out.append(width - display, ' ');
    return out;
}

} // namespace detail

/// Plain-text grid: rows are representations (encoders then Original),
/// columns the learners; the smallest mean RMSE in the table is starred.
inline std::string format_report(const ExperimentReport& report) {
    // locate the global minimum among populated cells
    const ReportCell* best = nullptr;
    for (const auto& c : report.cells)
        if (c.any_ok() && (!best || c.mean_rmse < best->mean_rmse)) best = &c;

    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Approach"});
    for (const auto& l : report.learners) grid.back().push_back(l);
    for (std::size_t r = 0; r < report.representations.size(); ++r) {
        std::vector<std::string> row{report.representations[r]};
        for (std::size_t c = 0; c < report.learners.size(); ++c) {
            const auto& cell = report.cells[r * report.learners.size() + c];
            row.push_back(detail::cell_text(cell, &cell == best));
        }
        grid.push_back(std::move(row));
    }

    std::vector<std::size_t> widths(grid.front().size(), 0);
    for (const auto& row : grid)
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::size_t display = 0;
            for (char ch : row[c])
                if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++display;
            widths[c] = std::max(widths[c], display);
        }

    std::ostringstream out;
    out << "config " << report.config_hash << " seed " << report.seed << " folds " << report.folds << "\n\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::size_t c = 0; c < grid[r].size(); ++c) {
            if (c) out << " | ";
            out << detail::pad(grid[r][c], widths[c]);
        }
        out << "\n";
        if (r == 0) {
            for (std::size_t c = 0; c < widths.size(); ++c) {
                if (c) out << "-+-";
                out << std::string(widths[c], '-');
            }
            out << "\n";
        }
    }
    return out.str();
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

inline std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Machine-readable counterpart of the table; per-fold values are kept so the
/// aggregates can be recomputed.
inline std::string report_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << "representation,learner,mean_rmse,sd_rmse,folds_used,fold_rmses,status,encoder_params,learner_params\n";
    for (const auto& cell : report.cells) {
        std::string fold_rmses, enc_params, lrn_params;
        for (std::size_t f = 0; f < cell.folds.size(); ++f) {
            if (f) {
                fold_rmses += ';';
                enc_params += ';';
                lrn_params += ';';
            }
            const auto& o = cell.folds[f];
            fold_rmses += o.ok ? detail::g17(o.test_rmse) : "NA";
            enc_params += o.ok ? o.encoder_params : "-";
            lrn_params += o.ok ? o.learner_params : "-";
        }
        std::string status = "ok";
        if (!cell.any_ok()) status = "failed: " + (cell.folds.empty() ? "no data" : cell.folds.front().reason);
        out << detail::csv_quote(cell.representation) << ',' << detail::csv_quote(cell.learner) << ','
            << (cell.any_ok() ? detail::g17(cell.mean_rmse) : "NA") << ','
            << (cell.any_ok() ? detail::g17(cell.sd_rmse) : "NA") << ',' << cell.folds_used << ','
            << detail::csv_quote(fold_rmses) << ',' << detail::csv_quote(status) << ','
            << detail::csv_quote(enc_params) << ',' << detail::csv_quote(lrn_params) << "\n";
    }
    return out.str();
}

/// Rebuild a renderable report from report.csv (used by the `report`
/// subcommand; histories and timing are not round-tripped).
inline ExperimentReport read_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::size_t line_no = 1;
    auto header = dataio::detail::read_record(in, line_no);
    if (!header || header->empty() || (*header)[0] != "representation")
        throw FormatError("'" + path + "': not a report csv");

    ExperimentReport report;
    while (auto rec = dataio::detail::read_record(in, line_no)) {
        if (rec->size() == 1 && (*rec)[0].empty()) continue;
        if (rec->size() != 9)
            throw FormatError("'" + path + "': expected 9 fields, got " + std::to_string(rec->size()));
        ReportCell cell;
        cell.representation = (*rec)[0];
        cell.learner = (*rec)[1];
        const std::string& status = (*rec)[6];
        std::istringstream folds_stream((*rec)[5]);
        std::string tok;
        while (std::getline(folds_stream, tok, ';')) {
            FoldOutcome o;
            if (tok != "NA" && !tok.empty()) {
                o.ok = true;
                o.test_rmse = std::stod(tok);
            } else if (status.rfind("failed:", 0) == 0) {
                o.reason = status.substr(8);
            }
            cell.folds.push_back(o);
        }
        cell.aggregate();
        if (std::find(report.representations.begin(), report.representations.end(), cell.representation) ==
            report.representations.end())
            report.representations.push_back(cell.representation);
        if (std::find(report.learners.begin(), report.learners.end(), cell.learner) == report.learners.end())
            report.learners.push_back(cell.learner);
        report.cells.push_back(std::move(cell));
        report.folds = std::max(report.folds, report.cells.back().folds.size());
    }
    return report;
}

/// One loss-curve CSV per trained (encoder, fold): epoch,train_loss,val_loss
/// plus the trainer's component columns.
inline void emit_loss_curves(const std::vector<std::pair<std::string, encoders::TrainingHistory>>& histories,
                             const std::string& dir) {
    if (histories.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
    for (const auto& [name, history] : histories) {
        if (history.epochs() == 0) throw ParamError("emit_loss_curves: empty history for '" + name + "'");
        std::string file = name;
        for (char& c : file)
            if (c == '/' || c == ' ') c = '_';
        encoders::write_history_csv(history, dir + "/loss_" + file + ".csv");
    }
}

/// report.txt + report.csv + loss_curves/ + effective_config.json are the
/// deterministic outputs; run_meta.txt carries wall-clock timing and is
/// excluded from the byte-reproducibility guarantee.
inline void write_report_files(const ExperimentReport& report, const json& effective_config,
                               const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir + "/" + name, std::ios::binary);
        if (!out) throw IoError("cannot write '" + dir + "/" + name + "'");
        out << content;
        if (!out) throw IoError("write failed for '" + dir + "/" + name + "'");
    };
    write("report.txt", format_report(report));
    write("report.csv", report_csv(report));
    write("effective_config.json", effective_config.dump(2) + "\n");
    emit_loss_curves(report.histories, dir + "/loss_curves");
    std::ostringstream meta;
    meta << "wall_seconds " << report.wall_seconds << "\n"
         << "cells_attempted " << report.cells_attempted << "\n";
    write("run_meta.txt", meta.str());
}

} // namespace tabrep::harness
