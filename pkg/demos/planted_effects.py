"""Walk through the planted-effect corpora and what each analysis reports.

Run with ``python3 demos/planted_effects.py``; takes well under a minute.
"""

import numpy as np

from llmsocial.core import snapshot_at
from llmsocial.cost import StubWillingness, run_cost_experiment, select_and_split
from llmsocial.homophily import community_homophily, individual_follow_homophily, neighbor_convergence
from llmsocial.ideology import LexiconStance, human_leaning, leaning_distribution
from llmsocial.sim import DAY_MS
from llmsocial.synthetic import homophily_corpus, influence_corpus, stance_corpus, toxicity_corpus
from llmsocial.text import hashed_bow_encoder
from llmsocial.toxicity import build_profiles, lexicon_scorer, score_texts, toxicity_concentration

enc = hashed_bow_encoder()

print("homophily: two topic groups that only follow look-alikes, then one shared topic")
for beta, topics in ((1.0, ("alpha", "beta")), (0.0, ("alpha",))):
    log = homophily_corpus(beta, seed=0, topics=topics)
    ch = community_homophily(snapshot_at(log), enc, n_random=10)
    ih = individual_follow_homophily(log, enc, window=10 * DAY_MS)
    print(f"  beta={beta}: community ratio {ch.mean_ratio:.2f}, at-follow ratio {ih.overall_mean:.2f}")

print("influence: agents copy followee tokens at rate gamma")
for gamma in (0.5, 0.0):
    series = neighbor_convergence(influence_corpus(gamma, seed=0), enc)["with_backstory"]
    print(f"  gamma={gamma}: bucket means {np.round(series.means(), 3).tolist()}")

print("toxicity: 30% of agents insult at rate 0.3")
tox = snapshot_at(toxicity_corpus(seed=0))
posts = tox.posts_in_order()
scorer = lexicon_scorer()
profiles = build_profiles(posts, scorer, agents=tox.agents)
print(f"  share of toxic posts by log2 bin: {toxicity_concentration(profiles)}")

print("stance: a polarized population piles up at the poles")
snap = snapshot_at(stance_corpus(seed=0))
pis = [human_leaning([snap.posts[p] for p in snap.posts_by_author[a]], LexiconStance(), a).pi
       for a in sorted(snap.posts_by_author)]
print(f"  mass at |pi| >= 0.8: {leaning_distribution(pis).mass_at_poles:.2f}")

print("cost experiment: stub willingness 0.8 in control, 0.456 with the preamble")
scores = dict(zip((p.post_id for p in posts), score_texts(scorer, [p.text for p in posts])))
control, treatment = select_and_split(profiles, tox.posts, scores, n=10, seed=0, tolerance=0.5)
rep = run_cost_experiment(control, treatment, StubWillingness(seed=0))
print(f"  rates {rep.rate_control:.2f} -> {rep.rate_treatment:.2f}, "
      f"reduction {rep.relative_reduction:.2f} (small n, so the interval is wide: "
      f"{rep.reduction_ci[0]:.2f} to {rep.reduction_ci[1]:.2f})")
