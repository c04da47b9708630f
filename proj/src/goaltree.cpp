#include "selfgoal/goaltree.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

#include "selfgoal/errors.hpp"

namespace selfgoal {

using nlohmann::json;

void TreeConfig::validate() const {
    if (xi < 0.0 || xi > 1.0) throw std::invalid_argument("TreeConfig: xi must be in [0,1]");
    if (search_k < 1 || stop_n < 1 || prune_after < 1 || max_children_per_decompose < 1)
        throw std::invalid_argument("TreeConfig: counts must be >= 1");
}

json TreeConfig::to_json() const {
    return json{{"xi", xi},
                {"search_k", search_k},
                {"stop_n", stop_n},
                {"prune_after", prune_after},
                {"prune_enabled", prune_enabled},
                {"max_children_per_decompose", max_children_per_decompose}};
}

TreeConfig TreeConfig::from_json(const json& j) {
    TreeConfig c;
    c.xi = j.value("xi", c.xi);
    c.search_k = j.value("search_k", c.search_k);
    c.stop_n = j.value("stop_n", c.stop_n);
    c.prune_after = j.value("prune_after", c.prune_after);
    c.prune_enabled = j.value("prune_enabled", c.prune_enabled);
    c.max_children_per_decompose = j.value("max_children_per_decompose", c.max_children_per_decompose);
    c.validate();
    return c;
}

GoalTree::GoalTree(std::string main_goal, TreeConfig config) : config_(config) {
    if (main_goal.empty()) throw std::invalid_argument("GoalTree: empty main goal");
    config_.validate();
    root_.id = "root";
    root_.text = std::move(main_goal);
}

std::size_t GoalTree::node_count() const {
    std::size_t n = 0;
    std::function<void(const GoalNode&)> walk = [&](const GoalNode& node) {
        ++n;
        for (const auto& c : node.children) walk(c);
    };
    walk(root_);
    return n;
}

std::vector<const GoalNode*> GoalTree::leaf_frontier() const {
    std::vector<const GoalNode*> out;
    std::function<void(const GoalNode&)> walk = [&](const GoalNode& node) {
        if (node.is_leaf()) {
            out.push_back(&node);
            return;
        }
        for (const auto& c : node.children) walk(c);
    };
    walk(root_);
    return out;
}

const GoalNode* GoalTree::find(std::string_view id) const {
    return const_cast<GoalTree*>(this)->find_mut(id);
}

GoalNode* GoalTree::find_mut(std::string_view id) {
    if (id == root_.id) return &root_;
    if (!id.starts_with("root-")) return nullptr;
    GoalNode* node = &root_;
    std::size_t pos = 4;  // after "root"
    while (pos < id.size()) {
        std::size_t next = id.find('-', pos + 1);
        std::string_view prefix = id.substr(0, next == std::string_view::npos ? id.size() : next);
        GoalNode* hit = nullptr;
        for (auto& c : node->children) {
            if (c.id == prefix) {
                hit = &c;
                break;
            }
        }
        if (!hit) return nullptr;
        node = hit;
        if (next == std::string_view::npos) break;
        pos = next;
    }
    return node->id == id ? node : nullptr;
}

std::vector<std::string> GoalTree::filter_candidates(const std::vector<std::string>& candidates,
                                                     const EmbeddingProvider& embed) const {
    std::vector<std::vector<double>> existing;
    std::function<void(const GoalNode&)> walk = [&](const GoalNode& node) {
        existing.push_back(embed.embed(node.text));
        for (const auto& c : node.children) walk(c);
    };
    walk(root_);

    std::vector<std::string> accepted;
    for (const auto& cand : candidates) {
        auto v = embed.embed(cand);
        bool redundant = false;
        for (const auto& e : existing) {
            if (cosine_similarity(v, e) >= config_.xi) {
                redundant = true;
                break;
            }
        }
        if (!redundant) {
            accepted.push_back(cand);
            existing.push_back(std::move(v));
        }
    }
    return accepted;
}

std::vector<std::string> GoalTree::insert_children(std::string_view parent_id_sv,
                                                   const std::vector<std::string>& texts,
                                                   int round) {
    GoalNode* parent = find_mut(parent_id_sv);
    if (!parent) throw NotFoundError("insert_children: unknown parent id: " + std::string(parent_id_sv));
    if (static_cast<int>(texts.size()) > config_.max_children_per_decompose)
        throw std::invalid_argument("insert_children: batch exceeds max_children_per_decompose");

    std::vector<std::string> ids;
    ids.reserve(texts.size());
    for (const auto& text : texts) {
        GoalNode child;
        child.id = parent->id + "-" + std::to_string(parent->next_child_index++);
        child.text = text;
        child.depth = parent->depth + 1;
        child.created_round = round;
        ids.push_back(child.id);
        parent->children.push_back(std::move(child));
    }
    if (!texts.empty()) last_insertion_round_ = round;
    return ids;
}

void GoalTree::mark_selected(const std::vector<std::string>& ids, int round) {
    // Validate every id before mutating anything.
    for (const auto& id : ids) {
        if (!find(id)) throw NotFoundError("mark_selected: unknown id: " + id);
    }
    std::vector<GoalNode*> to_mark;
    auto add_unique = [&](GoalNode* n) {
        if (std::find(to_mark.begin(), to_mark.end(), n) == to_mark.end()) to_mark.push_back(n);
    };
    for (const auto& id : ids) {
        std::string cur = id;
        while (!cur.empty()) {
            add_unique(find_mut(cur));
            cur = parent_id(cur);
        }
    }
    for (GoalNode* n : to_mark) {
        if (round < n->created_round)
            throw std::invalid_argument("mark_selected: round precedes node creation");
        n->last_selected_round = round;
        ++n->selection_count;
    }
}

bool GoalTree::stopping_met(int current_round) const {
    if (!last_insertion_round_) return false;
    return current_round - *last_insertion_round_ >= config_.stop_n;
}

std::vector<std::string> GoalTree::prune(int current_round) {
    std::vector<std::string> removed;
    if (!config_.prune_enabled) return removed;

    auto collect = [&removed](const GoalNode& node, auto&& self) -> void {
        removed.push_back(node.id);
        for (const auto& c : node.children) self(c, self);
    };
    std::function<void(GoalNode&)> walk = [&](GoalNode& node) {
        for (auto it = node.children.begin(); it != node.children.end();) {
            const GoalNode& child = *it;
            int last_use = std::max(child.last_selected_round.value_or(child.created_round),
                                    child.created_round);
            if (current_round - last_use > config_.prune_after) {
                collect(child, collect);
                it = node.children.erase(it);
            } else {
                walk(*it);
                ++it;
            }
        }
    };
    walk(root_);
    return removed;
}

namespace {

json node_to_json(const GoalNode& n) {
    json j{{"id", n.id},
           {"text", n.text},
           {"depth", n.depth},
           {"created_round", n.created_round},
           {"selection_count", n.selection_count},
           {"next_child_index", n.next_child_index}};
    if (n.last_selected_round) j["last_selected_round"] = *n.last_selected_round;
    json kids = json::array();
    for (const auto& c : n.children) kids.push_back(node_to_json(c));
    j["children"] = std::move(kids);
    return j;
}

GoalNode node_from_json(const json& j) {
    GoalNode n;
    n.id = j.at("id").get<std::string>();
    n.text = j.at("text").get<std::string>();
    n.depth = j.at("depth").get<int>();
    n.created_round = j.at("created_round").get<int>();
    n.selection_count = j.value("selection_count", 0);
    n.next_child_index = j.value("next_child_index", 0);
    if (j.contains("last_selected_round")) n.last_selected_round = j["last_selected_round"].get<int>();
    for (const auto& c : j.value("children", json::array())) n.children.push_back(node_from_json(c));
    // Hand-written documents may omit next_child_index; recover it from the
    // largest child index so later insertions cannot reuse an id.
    for (const auto& c : n.children) {
        auto pos = c.id.rfind('-');
        if (pos != std::string::npos) {
            int idx = std::atoi(c.id.c_str() + pos + 1);
            if (idx + 1 > n.next_child_index) n.next_child_index = idx + 1;
        }
    }
    return n;
}

}  // namespace

json GoalTree::to_json() const {
    json j{{"format", "goaltree-v1"},
           {"config", config_.to_json()},
           {"root", node_to_json(root_)}};
    if (last_insertion_round_) j["last_insertion_round"] = *last_insertion_round_;
    return j;
}

std::string GoalTree::serialize() const { return to_json().dump(2) + "\n"; }

GoalTree GoalTree::from_json(const json& j) {
    try {
        GoalTree t;
        t.config_ = TreeConfig::from_json(j.at("config"));
        t.root_ = node_from_json(j.at("root"));
        if (j.contains("last_insertion_round"))
            t.last_insertion_round_ = j["last_insertion_round"].get<int>();
        if (t.root_.id != "root") throw ParseError("goaltree: root id must be 'root'");
        return t;
    } catch (const json::exception& e) {
        throw ParseError(std::string("goaltree document: ") + e.what());
    }
}

GoalTree GoalTree::deserialize(const std::string& text) {
    try {
        return from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("goaltree document: ") + e.what(), e.byte);
    }
}

std::string GoalTree::flat_dump() const {
    std::string out;
    std::function<void(const GoalNode&)> walk = [&](const GoalNode& node) {
        out += node.id;
        out += ": ";
        out += node.text;
        out += "\n";
        for (const auto& c : node.children) walk(c);
    };
    walk(root_);
    return out;
}

std::string parent_id(std::string_view id) {
    auto pos = id.rfind('-');
    if (pos == std::string_view::npos) return "";
    return std::string(id.substr(0, pos));
}

}  // namespace selfgoal
