#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace staggercast::proxy {

struct RewriteSpec {
    /// Attribute marking content items; its value is the content id.
    std::string selector = "data-content-id";
};

using CachedPredicate = std::function<bool(std::string_view content_id)>;

/// Stably moves marked sibling elements with cached ids ahead of the others,
/// reusing the marked elements' own slots so every other byte stays put.
/// A sibling group is left alone unless each marked member has an explicit
/// end tag (or is void). Bodies that fail to tokenize come back unchanged.
std::string rewrite_html(std::string_view body, const RewriteSpec& spec, const CachedPredicate& cached);

struct MarkedElement {
    std::string content_id;
    std::string outer_html;
};

/// Marked elements in document order; empty optional when the body does not parse.
std::optional<std::vector<MarkedElement>> marked_elements(std::string_view body, const RewriteSpec& spec);

}  // namespace staggercast::proxy
