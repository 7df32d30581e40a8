#include "locrank/code_units.hpp"

#include "locrank/errors.hpp"
#include "locrank/io.hpp"
#include "locrank/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace locrank {

namespace {

// Tokenizer state carried across physical lines.
struct ScanState {
    bool in_triple = false;
    char triple_ch = '"';
    int depth = 0; // open ( [ { nesting
    bool backslash = false; // previous line ended with a line-joining backslash
};

struct LineScan {
    bool any_code = false; // anything besides whitespace and comments
    bool comment_only = false;
    int indent = 0; // meaningful only for fresh logical lines
    std::string_view stmt; // statement text from first non-ws char (fresh lines)
};

LineScan scan_line(std::string_view line, ScanState& st) {
    LineScan out;
    std::size_t i = 0;
    const bool fresh = !st.in_triple && st.depth == 0 && !st.backslash;
    st.backslash = false;

    if (st.in_triple) {
        out.any_code = true; // string content belongs to the enclosing statement
    } else if (fresh) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\f')) {
            if (line[i] == '\t') {
                out.indent = (out.indent / 8 + 1) * 8;
            } else if (line[i] == ' ') {
                ++out.indent;
            }
            ++i;
        }
        if (i >= line.size() || line[i] == '\r') {
            return out; // blank
        }
        if (line[i] == '#') {
            out.comment_only = true;
            return out;
        }
        out.stmt = line.substr(i);
    }

    bool trailing_backslash = false;
    while (i < line.size()) {
        char c = line[i];
        if (st.in_triple) {
            if (c == '\\') {
                i += 2;
                continue;
            }
            if (c == st.triple_ch && i + 2 < line.size() && line[i + 1] == c &&
                line[i + 2] == c) {
                st.in_triple = false;
                i += 3;
                continue;
            }
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
            ++i;
            continue;
        }
        out.any_code = true;
        trailing_backslash = false;
        if (c == '#') {
            break;
        }
        if (c == '\'' || c == '"') {
            if (i + 2 < line.size() && line[i + 1] == c && line[i + 2] == c) {
                st.in_triple = true;
                st.triple_ch = c;
                i += 3;
                continue;
            }
            // single-line string; tolerate a missing closing quote at EOL
            char q = c;
            ++i;
            while (i < line.size()) {
                if (line[i] == '\\') {
                    i += 2;
                    continue;
                }
                if (line[i] == q) {
                    break;
                }
                ++i;
            }
            if (i < line.size()) {
                ++i;
            }
            continue;
        }
        if (c == '(' || c == '[' || c == '{') {
            ++st.depth;
        } else if (c == ')' || c == ']' || c == '}') {
            if (st.depth > 0) {
                --st.depth;
            }
        } else if (c == '\\' && i + 1 == line.size()) {
            trailing_backslash = true;
        }
        ++i;
    }
    if (!st.in_triple && trailing_backslash) {
        st.backslash = true;
    }
    return out;
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Matches "def NAME", "async def NAME" or "class NAME" at the start of a
// statement. Keyword must be followed by whitespace.
bool match_block_header(std::string_view stmt, bool& is_class, std::string& name) {
    auto eat_kw = [&stmt](std::string_view kw) {
        if (stmt.size() > kw.size() && stmt.substr(0, kw.size()) == kw &&
            (stmt[kw.size()] == ' ' || stmt[kw.size()] == '\t')) {
            stmt.remove_prefix(kw.size());
            while (!stmt.empty() && (stmt.front() == ' ' || stmt.front() == '\t')) {
                stmt.remove_prefix(1);
            }
            return true;
        }
        return false;
    };

    eat_kw("async");
    if (eat_kw("def")) {
        is_class = false;
    } else if (eat_kw("class")) {
        is_class = true;
    } else {
        return false;
    }
    std::size_t n = 0;
    while (n < stmt.size() && is_ident_char(stmt[n])) {
        ++n;
    }
    if (n == 0 || std::isdigit(static_cast<unsigned char>(stmt[0]))) {
        return false;
    }
    name.assign(stmt.substr(0, n));
    return true;
}

struct Block {
    bool is_class = false;
    std::string name;
    int indent = 0;
    int start_line = 0;
    int last_code_line = 0;
};

struct PhysLine {
    std::size_t begin = 0; // byte offset of the first character
    std::size_t content_end = 0; // offset past the last content byte (before \r?\n)
};

std::vector<PhysLine> split_lines(const std::string& content) {
    std::vector<PhysLine> lines;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        std::size_t end = (nl == std::string::npos) ? content.size() : nl;
        std::size_t content_end = end;
        if (content_end > pos && content[content_end - 1] == '\r') {
            --content_end;
        }
        lines.push_back({pos, content_end});
        if (nl == std::string::npos) {
            break;
        }
        pos = nl + 1;
    }
    return lines;
}

} // namespace

RepoSnapshot RepoSnapshot::open(std::string repo_id, std::filesystem::path root_path,
                                std::string commit_ref) {
    std::error_code ec;
    if (!std::filesystem::is_directory(root_path, ec) || ec) {
        throw InputError("snapshot root is not a readable directory: " + root_path.string());
    }
    return RepoSnapshot{std::move(repo_id), std::move(root_path), std::move(commit_ref)};
}

std::string make_unit_id(const std::string& repo_id, const std::string& commit_ref,
                         const std::string& qualified_name) {
    std::string key;
    key.reserve(repo_id.size() + commit_ref.size() + qualified_name.size() + 2);
    key += repo_id;
    key += '\x1f';
    key += commit_ref;
    key += '\x1f';
    key += qualified_name;
    return text::hex64(text::fnv1a64(key));
}

std::vector<CodeUnit> parse_python_units(const std::string& file_path,
                                         const std::string& content,
                                         const std::string& repo_id,
                                         const std::string& commit_ref) {
    const auto lines = split_lines(content);
    ScanState st;
    std::vector<Block> stack;
    std::vector<CodeUnit> units;

    int pending_decorator_start = -1;
    int pending_decorator_indent = -1;

    auto pop_block = [&]() {
        Block b = std::move(stack.back());
        stack.pop_back();
        if (!stack.empty()) {
            stack.back().last_code_line =
                std::max(stack.back().last_code_line, b.last_code_line);
        }
        if (b.is_class) {
            return;
        }
        CodeUnit u;
        u.file_path = file_path;
        u.function_name = b.name;
        u.span = {b.start_line, b.last_code_line};
        std::string qual = file_path;
        for (const auto& ancestor : stack) {
            qual += "::";
            qual += ancestor.name;
            if (ancestor.is_class) {
                u.module_path.push_back(ancestor.name);
            }
        }
        qual += "::";
        qual += b.name;
        u.qualified_name = std::move(qual);
        units.push_back(std::move(u));
    };

    for (std::size_t idx = 0; idx < lines.size(); ++idx) {
        const int line_no = static_cast<int>(idx) + 1;
        const bool fresh = !st.in_triple && st.depth == 0 && !st.backslash;
        std::string_view raw(content.data() + lines[idx].begin,
                             lines[idx].content_end - lines[idx].begin);
        LineScan scan = scan_line(raw, st);
        if (!scan.any_code) {
            continue; // blank or comment-only
        }
        if (fresh) {
            while (!stack.empty() && scan.indent <= stack.back().indent) {
                pop_block();
            }
            if (!scan.stmt.empty() && scan.stmt.front() == '@') {
                if (pending_decorator_indent != scan.indent) {
                    pending_decorator_start = line_no;
                    pending_decorator_indent = scan.indent;
                }
            } else {
                bool is_class = false;
                std::string name;
                if (match_block_header(scan.stmt, is_class, name)) {
                    int start = (pending_decorator_indent == scan.indent &&
                                 pending_decorator_start > 0)
                                    ? pending_decorator_start
                                    : line_no;
                    stack.push_back({is_class, std::move(name), scan.indent, start, line_no});
                }
                pending_decorator_start = -1;
                pending_decorator_indent = -1;
            }
        }
        if (!stack.empty()) {
            stack.back().last_code_line = line_no;
        }
    }

    if (st.in_triple) {
        throw InputError(file_path + ": unterminated triple-quoted string");
    }
    if (st.depth > 0) {
        throw InputError(file_path + ": unbalanced brackets at end of file");
    }
    while (!stack.empty()) {
        pop_block();
    }

    std::sort(units.begin(), units.end(),
              [](const CodeUnit& a, const CodeUnit& b) { return a.span.start < b.span.start; });

    // Disambiguate duplicate qualified names in file order, then freeze ids
    // and source text.
    std::map<std::string, int> seen;
    for (auto& u : units) {
        int k = ++seen[u.qualified_name];
        if (k >= 2) {
            u.qualified_name += "#" + std::to_string(k);
        }
        u.unit_id = make_unit_id(repo_id, commit_ref, u.qualified_name);
        const auto& first = lines[static_cast<std::size_t>(u.span.start) - 1];
        const auto& last = lines[static_cast<std::size_t>(u.span.end) - 1];
        u.source_text = content.substr(first.begin, last.content_end - first.begin);
    }
    return units;
}

ExtractionResult extract_units(const RepoSnapshot& snapshot,
                               const std::set<std::string>& extensions) {
    if (extensions.empty()) {
        throw InputError("extract_units: no file extensions given");
    }
    std::error_code ec;
    if (!std::filesystem::is_directory(snapshot.root_path, ec) || ec) {
        throw InputError("snapshot root is not a readable directory: " +
                         snapshot.root_path.string());
    }

    std::vector<std::string> rel_paths;
    for (std::filesystem::recursive_directory_iterator
             it(snapshot.root_path,
                std::filesystem::directory_options::skip_permission_denied, ec),
         end;
         it != end; it.increment(ec)) {
        if (ec) {
            break;
        }
        if (!it->is_regular_file(ec)) {
            continue;
        }
        const auto& p = it->path();
        if (extensions.count(p.extension().string()) == 0) {
            continue;
        }
        rel_paths.push_back(
            p.lexically_relative(snapshot.root_path).generic_string());
    }
    std::sort(rel_paths.begin(), rel_paths.end());

    ExtractionResult result;
    for (const auto& rel : rel_paths) {
        std::string content;
        try {
            content = io::read_file(snapshot.root_path / rel);
        } catch (const InputError& e) {
            result.skipped.push_back({rel, e.what()});
            continue;
        }
        try {
            auto units = parse_python_units(rel, content, snapshot.repo_id,
                                            snapshot.commit_ref);
            for (auto& u : units) {
                result.units.push_back(std::move(u));
            }
        } catch (const InputError& e) {
            result.skipped.push_back({rel, e.what()});
        }
    }
    return result;
}

const CodeUnit* locate_enclosing_unit(const std::vector<CodeUnit>& units,
                                      const std::string& file_path, int line) {
    const CodeUnit* best = nullptr;
    for (const auto& u : units) {
        if (u.file_path != file_path || !u.span.contains(line)) {
            continue;
        }
        if (best == nullptr || u.span.length() < best->span.length() ||
            (u.span.length() == best->span.length() && u.span.start > best->span.start)) {
            best = &u;
        }
    }
    return best;
}

std::string module_key(const CodeUnit& unit) {
    std::string key = unit.file_path;
    for (const auto& cls : unit.module_path) {
        key += "::";
        key += cls;
    }
    return key;
}

std::string units_to_jsonl(const std::vector<CodeUnit>& units) {
    std::ostringstream out;
    for (const auto& u : units) {
        nlohmann::ordered_json j;
        j["unit_id"] = u.unit_id;
        j["file_path"] = u.file_path;
        j["module_path"] = u.module_path;
        j["function_name"] = u.function_name;
        j["qualified_name"] = u.qualified_name;
        j["span"] = {{"start", u.span.start}, {"end", u.span.end}};
        j["source_text"] = u.source_text;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<CodeUnit> units_from_jsonl(const std::string& jsonl) {
    std::vector<CodeUnit> units;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError("units jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        if (j.contains("header")) {
            continue;
        }
        CodeUnit u;
        u.unit_id = j.at("unit_id").get<std::string>();
        u.file_path = j.at("file_path").get<std::string>();
        u.module_path = j.at("module_path").get<std::vector<std::string>>();
        u.function_name = j.at("function_name").get<std::string>();
        u.qualified_name = j.at("qualified_name").get<std::string>();
        u.span.start = j.at("span").at("start").get<int>();
        u.span.end = j.at("span").at("end").get<int>();
        u.source_text = j.at("source_text").get<std::string>();
        units.push_back(std::move(u));
    }
    return units;
}

} // namespace locrank
