#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "disent/common.hpp"
#include "disent/dataset.hpp"
#include "disent/stopwords.hpp"

namespace disent {

/// Token -> row lookup over a word-vector matrix (V x d_w).
struct WordVectorTable {
    std::unordered_map<std::string, Index> vocab;
    Matrix vectors;

    Index dim() const { return vectors.cols(); }
    Index size() const { return vectors.rows(); }
};

struct LabeledCorpus {
    std::vector<std::string> documents;
    std::vector<int> labels;
    std::vector<std::string> class_names;
};

/// Lowercase, strip non-alphanumeric characters, drop tokens shorter than
/// 3 characters, then drop stop words. Rule order follows the listing in
/// preprocessing: strip, length-filter, stop-filter.
inline std::vector<std::string> preprocess(std::string_view text,
                                           const std::unordered_set<std::string>& stopwords =
                                               english_stopword_set()) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.size() >= 3 && stopwords.find(current) == stopwords.end())
            tokens.push_back(current);
        current.clear();
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::isalnum(c) && c < 128) {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
        // other bytes (punctuation, non-ASCII) are stripped
    }
    flush();
    return tokens;
}

/// Parses whitespace-separated word vectors: one token then d_w reals per
/// line. Duplicate tokens keep the first occurrence.
inline WordVectorTable load_word_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open word-vector file: " + path);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> tokens;
    std::unordered_map<std::string, Index> vocab;
    Index dim = -1;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        if (!(ss >> token))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing token");
        std::vector<double> values;
        std::string field;
        while (ss >> field) {
            double v = 0;
            const char* begin = field.data();
            const char* end = begin + field.size();
            auto [ptr, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc() || ptr != end)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": unparsable number '" + field + "'");
            values.push_back(v);
        }
        if (values.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": no vector values");
        if (dim < 0) dim = static_cast<Index>(values.size());
        if (static_cast<Index>(values.size()) != dim)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(dim) + " values, got " +
                                     std::to_string(values.size()));
        if (vocab.find(token) != vocab.end()) continue;  // first occurrence wins
        vocab.emplace(std::move(token), static_cast<Index>(rows.size()));
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw std::runtime_error("empty word-vector file: " + path);

    WordVectorTable table;
    table.vocab = std::move(vocab);
    table.vectors.resize(static_cast<Index>(rows.size()), dim);
    for (Index i = 0; i < table.vectors.rows(); ++i)
        for (Index j = 0; j < dim; ++j) table.vectors(i, j) = rows[i][j];
    return table;
}

struct DocumentEmbedding {
    Vector mean;
    bool all_oov = false;  // no token was in vocabulary: zero-vector fallback
};

/// Arithmetic mean of the word vectors of in-vocabulary tokens. OOV tokens
/// are skipped; a fully-OOV document yields the zero vector, flagged.
inline DocumentEmbedding embed_document(const std::vector<std::string>& tokens,
                                        const WordVectorTable& table) {
    DocumentEmbedding result;
    result.mean = Vector::Zero(table.dim());
    Index hits = 0;
    for (const auto& token : tokens) {
        auto it = table.vocab.find(token);
        if (it == table.vocab.end()) continue;
        result.mean += table.vectors.row(it->second).transpose();
        ++hits;
    }
    if (hits == 0) {
        result.all_oov = true;
    } else {
        result.mean /= static_cast<double>(hits);
    }
    return result;
}

namespace detail {

// RFC-4180-style row split: quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace detail

/// Reads a CSV with header `label,text`. Labels are integer class indices,
/// or class names resolved against `class_names` (e.g. from a sidecar list);
/// integer labels discover class names "0".."k-1" unless provided.
inline LabeledCorpus load_corpus_csv(const std::string& path,
                                     std::vector<std::string> class_names = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus: " + path);

    LabeledCorpus corpus;
    corpus.class_names = std::move(class_names);
    std::unordered_map<std::string, int> name_to_idx;
    for (std::size_t i = 0; i < corpus.class_names.size(); ++i)
        name_to_idx[corpus.class_names[i]] = static_cast<int>(i);

    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = detail::split_csv_row(line);
        if (!header_seen) {
            if (fields.size() < 2 || fields[0] != "label" || fields[1] != "text")
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected header 'label,text'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 2)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 2 fields, got " +
                                     std::to_string(fields.size()));
        const std::string& raw = fields[0];
        int label = -1;
        auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), label);
        if (ec == std::errc() && ptr == raw.data() + raw.size()) {
            if (label < 0)
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative label");
        } else {
            auto it = name_to_idx.find(raw);
            if (it == name_to_idx.end())
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown class name '" +
                                         raw + "' (no sidecar entry)");
            label = it->second;
        }
        max_label = std::max(max_label, label);
        corpus.labels.push_back(label);
        corpus.documents.push_back(fields[1]);
    }
    if (!header_seen) throw std::runtime_error("empty corpus: " + path);

    if (corpus.class_names.empty()) {
        for (int i = 0; i <= max_label; ++i) corpus.class_names.push_back(std::to_string(i));
    } else if (max_label >= static_cast<int>(corpus.class_names.size())) {
        throw std::runtime_error(path + ": label " + std::to_string(max_label) +
                                 " out of range for " + std::to_string(corpus.class_names.size()) +
                                 " classes");
    }
    return corpus;
}

struct CorpusEmbedding {
    EmbeddedDataset dataset;
    std::vector<char> all_oov;  // per-document zero-vector flags

    std::size_t flagged_count() const {
        return static_cast<std::size_t>(std::count(all_oov.begin(), all_oov.end(), 1));
    }
};

/// preprocess + embed_document per document, preserving document order.
/// Features are quantized to f32 precision so the cache round-trips
/// bit-identically.
inline CorpusEmbedding embed_corpus(const LabeledCorpus& corpus, const WordVectorTable& table,
                                    const std::unordered_set<std::string>& stopwords =
                                        english_stopword_set()) {
    CorpusEmbedding out;
    const Index n = static_cast<Index>(corpus.documents.size());
    out.dataset.features.resize(n, table.dim());
    out.dataset.labels = corpus.labels;
    out.all_oov.resize(corpus.documents.size(), 0);
    for (Index i = 0; i < n; ++i) {
        auto emb = embed_document(preprocess(corpus.documents[i], stopwords), table);
        for (Index j = 0; j < table.dim(); ++j)
            out.dataset.features(i, j) = static_cast<double>(static_cast<float>(emb.mean[j]));
        out.all_oov[i] = emb.all_oov ? 1 : 0;
    }
    validate_dataset(out.dataset);
    return out;
}

/// embed_corpus + persist to the binary cache format.
inline CorpusEmbedding build_embedding_cache(const LabeledCorpus& corpus,
                                             const WordVectorTable& table,
                                             const std::string& cache_path,
                                             const std::unordered_set<std::string>& stopwords =
                                                 english_stopword_set(),
                                             bool scale = false) {
    CorpusEmbedding out = embed_corpus(corpus, table, stopwords);
    if (scale) {
        out.dataset = minmax_scale(out.dataset);
        // Match cache precision so the in-memory dataset equals a reload.
        for (Index i = 0; i < out.dataset.rows(); ++i)
            for (Index j = 0; j < out.dataset.dim(); ++j)
                out.dataset.features(i, j) =
                    static_cast<double>(static_cast<float>(out.dataset.features(i, j)));
    }
    write_cache(out.dataset, cache_path);
    return out;
}

}  // namespace disent
