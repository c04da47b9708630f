#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "selfgoal/embedding.hpp"

namespace selfgoal {

struct TreeConfig {
    double xi = 0.8;                    // similarity threshold in [0,1]
    int search_k = 5;                   // subgoals selected per step
    int stop_n = 3;                     // rounds without insertion before freeze
    int prune_after = 5;                // consecutive unselected rounds before deletion
    bool prune_enabled = true;
    int max_children_per_decompose = 5;

    void validate() const;
    nlohmann::json to_json() const;
    static TreeConfig from_json(const nlohmann::json& j);
    bool operator==(const TreeConfig&) const = default;
};

/// One subgoal node. Ids are path strings (`root-0-3`): a child's id is its
/// parent's id plus "-" plus the index assigned at creation. Ids are
/// permanent; pruning never renumbers surviving siblings.
struct GoalNode {
    std::string id;
    std::string text;
    int depth = 0;
    int created_round = 0;
    std::optional<int> last_selected_round;
    int selection_count = 0;
    int next_child_index = 0;  // indices ever issued; grows past prunes
    std::vector<GoalNode> children;

    bool is_leaf() const { return children.empty(); }
    bool operator==(const GoalNode&) const = default;
};

/// The subgoal tree: root holds the high-level goal, decomposition grows
/// leaves under selected nodes, the similarity filter keeps growth
/// non-redundant, and stale branches are pruned. Pure mechanics only; the
/// agent loop lives elsewhere.
class GoalTree {
public:
    GoalTree(std::string main_goal, TreeConfig config);

    const GoalNode& root() const { return root_; }
    const TreeConfig& config() const { return config_; }
    std::optional<int> last_insertion_round() const { return last_insertion_round_; }
    std::size_t node_count() const;

    /// Childless nodes in depth-first, child-index order. A bare root is its
    /// own frontier.
    std::vector<const GoalNode*> leaf_frontier() const;

    const GoalNode* find(std::string_view id) const;

    /// A candidate is accepted iff its max cosine similarity against every
    /// existing node text and every earlier-accepted candidate in the same
    /// batch stays below xi. Order preserved.
    std::vector<std::string> filter_candidates(const std::vector<std::string>& candidates,
                                               const EmbeddingProvider& embed) const;

    /// Appends children under parent_id with consecutive indices; returns the
    /// new ids. Texts are assumed already filtered.
    std::vector<std::string> insert_children(std::string_view parent_id,
                                             const std::vector<std::string>& texts,
                                             int round);

    /// Marks each id and all of its ancestors as selected at `round`
    /// (a branch in use is in use). Each affected node is marked once per call.
    void mark_selected(const std::vector<std::string>& ids, int round);

    /// True iff some insertion happened and `current_round - last insertion`
    /// has reached stop_n. A bare root never stops (nothing was decomposed).
    bool stopping_met(int current_round) const;

    /// Removes every non-root subtree whose top node went unselected for more
    /// than prune_after rounds (counting from creation when never selected).
    /// Returns all removed ids in depth-first order. No-op when pruning is
    /// disabled in the config.
    std::vector<std::string> prune(int current_round);

    /// Lossless structured document (JSON).
    std::string serialize() const;
    nlohmann::json to_json() const;
    static GoalTree deserialize(const std::string& text);
    static GoalTree from_json(const nlohmann::json& j);

    /// The flat `id: text` listing, one node per line, depth-first.
    std::string flat_dump() const;

    bool operator==(const GoalTree&) const = default;

private:
    GoalTree() = default;

    GoalNode* find_mut(std::string_view id);

    GoalNode root_;
    std::optional<int> last_insertion_round_;
    TreeConfig config_;
};

/// Id of the parent (`root-0-3` -> `root-0`); empty for the root itself.
std::string parent_id(std::string_view id);

}  // namespace selfgoal
