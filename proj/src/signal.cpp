#include "tapir/signal.hpp"

#include <fstream>

#include "tapir/ops.hpp"

namespace tapir {

double ActionSeq::revise_share() const {
    if (actions.empty()) return 0.0;
    std::size_t r = 0;
    for (Action a : actions) {
        if (a == Action::Revise) ++r;
    }
    return static_cast<double>(r) / static_cast<double>(actions.size());
}

ActionSeq derive_actions(const PrefixTimeline& timeline) {
    ActionSeq seq;
    const auto& rows = timeline.rows;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].labels.size() != t + 1) throw DataError("ragged timeline");
        if (t == 0) {
            seq.actions.push_back(Action::Write);
            continue;
        }
        bool edited = false;
        for (std::size_t i = 0; i < t; ++i) {  // excludes the new label y_t
            if (rows[t].labels[i] != rows[t - 1].labels[i]) {
                edited = true;
                break;
            }
        }
        seq.actions.push_back(edited ? Action::Revise : Action::Write);
    }
    return seq;
}

PrefixTimeline collect_prefix_timeline(const EncoderModel& lt_model, const std::vector<int>& ids) {
    if (lt_model.kind != ReviserKind::LinearTransformer || lt_model.layers() != 1) {
        throw DataError("prefix collection requires a single-layer linear-transformer model");
    }
    PrefixTimeline tl;
    tl.n_tokens = static_cast<int>(ids.size());
    for (std::size_t t = 1; t <= ids.size(); ++t) {
        const std::vector<int> prefix(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(t));
        Tensor logits = lt_model.logits(prefix, AttentionMask::None);
        std::vector<int> row;
        row.reserve(t);
        for (int i = 0; i < static_cast<int>(t); ++i) row.push_back(argmax_row(logits, i));
        tl.rows.push_back({std::move(row), Action::Revise, 1.0});
    }
    return tl;
}

void write_actions_file(const std::string& path, const std::string& corpus_sha256,
                        const std::vector<ActionSeq>& seqs) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open actions file for writing: " + path);
    f << "#corpus-sha256=" << corpus_sha256 << '\n';
    for (const auto& seq : seqs) {
        for (std::size_t i = 0; i < seq.actions.size(); ++i) {
            if (i > 0) f << ' ';
            f << static_cast<char>(seq.actions[i]);
        }
        f << '\n';
    }
}

ActionsFile read_actions_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open actions file: " + path);
    ActionsFile af;
    std::string line;
    if (!std::getline(f, line)) throw DataError("empty actions file: " + path);
    const std::string header = "#corpus-sha256=";
    if (line.rfind(header, 0) != 0) throw DataError("actions file is missing its corpus hash header");
    af.corpus_sha256 = line.substr(header.size());
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        ActionSeq seq;
        for (char c : line) {
            if (c == ' ') continue;
            if (c == 'W') seq.actions.push_back(Action::Write);
            else if (c == 'R') seq.actions.push_back(Action::Revise);
            else throw DataError("actions file contains an unknown symbol");
        }
        af.seqs.push_back(std::move(seq));
    }
    return af;
}

}  // namespace tapir
