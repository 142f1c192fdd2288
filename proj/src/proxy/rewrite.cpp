#include "staggercast/proxy/rewrite.hpp"

#include "staggercast/proxy/http.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <memory>

namespace staggercast::proxy {
namespace {

constexpr std::array<std::string_view, 14> kVoid{"area", "base", "br",   "col",   "embed",  "hr",    "img",
                                                 "input", "link", "meta", "param", "source", "track", "wbr"};
constexpr std::array<std::string_view, 5> kRawText{"script", "style", "textarea", "title", "xmp"};

template <std::size_t N>
bool one_of(const std::array<std::string_view, N>& set, std::string_view name) {
    return std::find(set.begin(), set.end(), name) != set.end();
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string decode_entities(std::string_view v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != '&') {
            out += v[i];
            continue;
        }
        const auto semi = v.find(';', i);
        if (semi == std::string_view::npos) {
            out += v[i];
            continue;
        }
        const auto ent = v.substr(i + 1, semi - i - 1);
        std::string rep;
        if (ent == "amp") rep = "&";
        else if (ent == "quot") rep = "\"";
        else if (ent == "apos" || ent == "#39") rep = "'";
        else if (ent == "lt") rep = "<";
        else if (ent == "gt") rep = ">";
        if (rep.empty()) {
            out += v[i];
            continue;
        }
        out += rep;
        i = semi;
    }
    return out;
}

struct Node {
    std::string name;
    std::size_t begin = 0;  // '<' of the start tag
    std::size_t end = 0;    // one past the end tag (or the implicit close point)
    bool explicit_end = false;
    std::optional<std::string> content_id;
    std::vector<std::unique_ptr<Node>> children;
};

class Parser {
public:
    Parser(std::string_view src, std::string selector) : src_(src), selector_(lower(selector)) {}

    /// Root node spanning the whole body, or null on a tokenizer failure.
    std::unique_ptr<Node> parse() {
        auto root = std::make_unique<Node>();
        root->end = src_.size();
        root->explicit_end = true;
        stack_.push_back(root.get());
        while (pos_ < src_.size()) {
            if (!step()) return nullptr;
        }
        while (stack_.size() > 1) close_top(src_.size());
        return root;
    }

private:
    bool step() {
        const auto lt = src_.find('<', pos_);
        if (lt == std::string_view::npos) {
            pos_ = src_.size();
            return true;
        }
        pos_ = lt;
        const auto rest = src_.substr(lt);
        if (rest.starts_with("<!--")) {
            const auto close = src_.find("-->", lt + 4);
            if (close == std::string_view::npos) return false;
            pos_ = close + 3;
            return true;
        }
        if (rest.size() >= 2 && (rest[1] == '!' || rest[1] == '?')) {
            const auto close = src_.find('>', lt);
            if (close == std::string_view::npos) return false;
            pos_ = close + 1;
            return true;
        }
        if (rest.size() >= 2 && rest[1] == '/') {
            if (rest.size() < 3 || !is_alpha(rest[2])) {
                // Not an end tag; treated as text.
                pos_ = lt + 1;
                return true;
            }
            return end_tag(lt);
        }
        if (rest.size() >= 2 && is_alpha(rest[1])) return start_tag(lt);
        pos_ = lt + 1;
        return true;
    }

    std::size_t name_end(std::size_t from) const {
        std::size_t i = from;
        while (i < src_.size() && !is_space(src_[i]) && src_[i] != '/' && src_[i] != '>') ++i;
        return i;
    }

    bool end_tag(std::size_t lt) {
        const auto ne = name_end(lt + 2);
        const std::string name = lower(src_.substr(lt + 2, ne - lt - 2));
        const auto gt = src_.find('>', ne);
        if (gt == std::string_view::npos) return false;
        pos_ = gt + 1;
        if (one_of(kVoid, name)) return true;
        auto it = std::find_if(stack_.rbegin(), stack_.rend() - 1, [&](const Node* n) { return n->name == name; });
        if (it == stack_.rend() - 1) return false;
        // Elements left open inside the matched one end where its end tag begins.
        while (stack_.back()->name != name) close_top(lt);
        stack_.back()->end = pos_;
        stack_.back()->explicit_end = true;
        stack_.pop_back();
        return true;
    }

    bool start_tag(std::size_t lt) {
        const auto ne = name_end(lt + 1);
        auto node = std::make_unique<Node>();
        node->name = lower(src_.substr(lt + 1, ne - lt - 1));
        node->begin = lt;
        std::size_t i = ne;
        bool self_closing = false;
        while (true) {
            while (i < src_.size() && is_space(src_[i])) ++i;
            if (i >= src_.size()) return false;
            if (src_[i] == '>') {
                ++i;
                break;
            }
            if (src_[i] == '/') {
                if (i + 1 < src_.size() && src_[i + 1] == '>') {
                    self_closing = true;
                    i += 2;
                    break;
                }
                ++i;
                continue;
            }
            std::size_t an = i;
            while (an < src_.size() && !is_space(src_[an]) && src_[an] != '=' && src_[an] != '>' &&
                   !(src_[an] == '/' && an + 1 < src_.size() && src_[an + 1] == '>')) {
                ++an;
            }
            const std::string attr = lower(src_.substr(i, an - i));
            i = an;
            while (i < src_.size() && is_space(src_[i])) ++i;
            std::optional<std::string> value;
            if (i < src_.size() && src_[i] == '=') {
                ++i;
                while (i < src_.size() && is_space(src_[i])) ++i;
                if (i >= src_.size()) return false;
                if (src_[i] == '"' || src_[i] == '\'') {
                    const auto q = src_.find(src_[i], i + 1);
                    if (q == std::string_view::npos) return false;
                    value = decode_entities(src_.substr(i + 1, q - i - 1));
                    i = q + 1;
                } else {
                    std::size_t ve = i;
                    while (ve < src_.size() && !is_space(src_[ve]) && src_[ve] != '>') ++ve;
                    value = decode_entities(src_.substr(i, ve - i));
                    i = ve;
                }
            }
            if (attr == selector_ && !node->content_id) node->content_id = value.value_or("");
        }
        pos_ = i;
        Node* raw = node.get();
        stack_.back()->children.push_back(std::move(node));
        if (self_closing || one_of(kVoid, raw->name)) {
            raw->end = pos_;
            raw->explicit_end = true;
            return true;
        }
        if (one_of(kRawText, raw->name)) {
            const std::string needle = "</" + raw->name;
            std::size_t j = pos_;
            while (true) {
                j = find_ci(needle, j);
                if (j == std::string_view::npos) return false;
                const auto after = j + needle.size();
                if (after < src_.size() && (src_[after] == '>' || is_space(src_[after]) || src_[after] == '/')) break;
                ++j;
            }
            const auto gt = src_.find('>', j);
            if (gt == std::string_view::npos) return false;
            raw->end = gt + 1;
            raw->explicit_end = true;
            pos_ = gt + 1;
            return true;
        }
        stack_.push_back(raw);
        return true;
    }

    std::size_t find_ci(std::string_view needle, std::size_t from) const {
        for (std::size_t i = from; i + needle.size() <= src_.size(); ++i) {
            if (iequals(src_.substr(i, needle.size()), needle)) return i;
        }
        return std::string_view::npos;
    }

    void close_top(std::size_t at) {
        stack_.back()->end = at;
        stack_.pop_back();
    }

    std::string_view src_;
    std::string selector_;
    std::size_t pos_ = 0;
    std::vector<Node*> stack_;
};

/// Emits src[n.begin, n.end) with marked child groups reordered.
void emit(std::string_view src, const Node& n, const CachedPredicate& cached, std::string& out) {
    std::vector<const Node*> marked;
    bool reorderable = true;
    for (const auto& c : n.children) {
        if (c->content_id) {
            marked.push_back(c.get());
            reorderable = reorderable && c->explicit_end;
        }
    }
    std::vector<const Node*> order = marked;
    if (reorderable && marked.size() > 1) {
        std::stable_partition(order.begin(), order.end(), [&](const Node* m) { return cached(*m->content_id); });
    }
    std::size_t cursor = n.begin;
    std::size_t next_marked = 0;
    for (const auto& c : n.children) {
        out.append(src.substr(cursor, c->begin - cursor));
        const Node* which = c->content_id ? order[next_marked++] : c.get();
        emit(src, *which, cached, out);
        cursor = c->end;
    }
    out.append(src.substr(cursor, n.end - cursor));
}

void collect(std::string_view src, const Node& n, std::vector<MarkedElement>& out) {
    for (const auto& c : n.children) {
        if (c->content_id) out.push_back({*c->content_id, std::string(src.substr(c->begin, c->end - c->begin))});
        collect(src, *c, out);
    }
}

}  // namespace

std::string rewrite_html(std::string_view body, const RewriteSpec& spec, const CachedPredicate& cached) {
    const auto root = Parser(body, spec.selector).parse();
    if (!root) return std::string(body);
    std::string out;
    out.reserve(body.size());
    emit(body, *root, cached, out);
    return out;
}

std::optional<std::vector<MarkedElement>> marked_elements(std::string_view body, const RewriteSpec& spec) {
    const auto root = Parser(body, spec.selector).parse();
    if (!root) return std::nullopt;
    std::vector<MarkedElement> out;
    collect(body, *root, out);
    return out;
}

}  // namespace staggercast::proxy
