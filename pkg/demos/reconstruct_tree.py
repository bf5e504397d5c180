"""Sample labeled data on a hidden tree, then recover the tree and the labels."""
# %%
from deeptree import InstanceSpec, ModelParams, TreeTopology, generate_instance, make_dataset, reconstruct_tree, sample
from deeptree.reconstruct.tree import topology_correct
from deeptree.scoring import reconstruction_summary

# A binary tree of height 6: 64 leaves, each a string of k letters over q=4.
tree = TreeTopology(d=2, h=6)
params = ModelParams("IIDM", q=4, k=2000, lam=0.9, seed=1)
truth = sample(tree, params)
print("leaf representation shape:", truth.reps[tree.h].shape)

# %%
# Two labels hang at depth 1; labeled leaves are the subtrees rooted at depth 3.
labels, S = generate_instance(tree, InstanceSpec(h0=1, h1=3), seed=1)
truth = truth.with_instance(labels, S)
data = make_dataset(truth)
print(f"{len(data.labels)} labeled leaves, {len(data.unlabeled_nodes)} unlabeled")

# %%
# Rebuild the hierarchy two levels at a time, estimating ancestors by belief propagation.
result = reconstruct_tree(data, params, r=2)
print("ok:", result.ok, "topology correct:", topology_correct(result, tree))
for level in result.diagnostics["levels"]:
    print(f"  level {level['level']}: window {level['window']}, min margin {level['min_margin']:.2f}")

# %%
summary = reconstruction_summary(result, data, truth)
print(f"label accuracy on unlabeled leaves: {summary['accuracy']:.3f}")

# %%
# Same run on the relabeled model: each edge also permutes the alphabet.
params = ModelParams("VRM", q=4, k=2000, lam=0.9, regime="random", seed=1)
truth = sample(tree, params).with_instance(labels, S)
data = make_dataset(truth)
summary = reconstruction_summary(reconstruct_tree(data, params, r=2), data, truth)
print(f"relabeled model: topology {summary['topology']}, accuracy {summary['accuracy']:.3f}, "
      f"sibling maps {summary['sigma_ok']}/{summary['sigma_total']}")
