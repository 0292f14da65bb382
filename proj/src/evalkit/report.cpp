#include "mtil/evalkit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtil/error.hpp"

namespace mtil::evalkit {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string join_commas(const std::vector<std::string>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

double EvalReport::mean_rouge2_f() const {
    if (tasks.empty()) return 0.0;
    double s = 0;
    for (const auto& t : tasks) s += t.rouge2_f;
    return s / static_cast<double>(tasks.size());
}

double EvalReport::mean_rougeL_f() const {
    if (tasks.empty()) return 0.0;
    double s = 0;
    for (const auto& t : tasks) s += t.rougeL_f;
    return s / static_cast<double>(tasks.size());
}

const TaskScore* EvalReport::find(const std::string& task_id) const {
    for (const auto& t : tasks)
        if (t.task_id == task_id) return &t;
    return nullptr;
}

void save_report(const EvalReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("report: cannot write " + path);
    os << "# mtil-eval-report v1\n";
    os << "# tokenization: lowercase, alphanumeric runs, no stemming\n";
    os << "# instruction: " << report.instruction_variant << "\n";
    char buf[64];
    for (const auto& t : report.tasks) {
        std::snprintf(buf, sizeof(buf), "%.6f\t%.6f", t.rouge2_f, t.rougeL_f);
        os << "task\t" << t.task_id << "\t" << join_commas(t.categories) << "\t"
           << t.n_instances << "\t" << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.6f\t%.6f", report.mean_rouge2_f(),
                  report.mean_rougeL_f());
    os << "summary\t" << report.tasks.size() << "\t" << buf << "\n";
    if (!os) throw IoError("report: write failed for " + path);
}

EvalReport load_report(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("report: cannot open " + path);
    EvalReport report;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# instruction: ";
            if (line.rfind(key, 0) == 0) report.instruction_variant = line.substr(key.size());
            continue;
        }
        auto fields = split_tabs(line);
        if (fields[0] == "task") {
            if (fields.size() != 6) throw DataError("report: malformed task line: " + line);
            TaskScore t;
            t.task_id = fields[1];
            t.categories = split_commas(fields[2]);
            t.n_instances = std::stoi(fields[3]);
            t.rouge2_f = std::stod(fields[4]);
            t.rougeL_f = std::stod(fields[5]);
            report.tasks.push_back(std::move(t));
        }
    }
    return report;
}

std::vector<DifficultyBin> bin_by_difficulty(const EvalReport& baseline) {
    if (baseline.tasks.size() < 3)
        throw ContractError("bin_by_difficulty: need at least 3 tasks");
    std::vector<const TaskScore*> sorted;
    for (const auto& t : baseline.tasks) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(), [](const TaskScore* a, const TaskScore* b) {
        if (a->rouge2_f != b->rouge2_f) return a->rouge2_f < b->rouge2_f;
        return a->task_id < b->task_id;
    });

    const size_t n = sorted.size();
    const size_t base = n / 3, rem = n % 3;
    // remainder goes to the earlier bins (hard, then medium)
    const size_t sizes[3] = {base + (rem > 0 ? 1 : 0), base + (rem > 1 ? 1 : 0), base};
    const char* labels[3] = {"hard", "medium", "easy"};

    std::vector<DifficultyBin> bins;
    size_t pos = 0;
    for (int b = 0; b < 3; ++b) {
        DifficultyBin bin;
        bin.label = labels[b];
        for (size_t i = 0; i < sizes[b]; ++i) bin.task_ids.push_back(sorted[pos++]->task_id);
        bins.push_back(std::move(bin));
    }
    return bins;
}

std::optional<double> pct_change(double baseline, double value) {
    if (baseline <= 0.0) return std::nullopt;
    return 100.0 * (value - baseline) / baseline;
}

}  // namespace mtil::evalkit
