"""Which lagged variables are valid instruments?  Reading it off a graph.

The full time graph of a VAR(1) process is infinite.  Projecting it onto a
finite window of observed variables gives a mixed graph with directed and
bidirected edges, on which the IV conditions become separation statements.

Run: python3 demos/03_marginal_graphs.py
"""

from tsiv.graph import check_conditions, project_window
from tsiv.var_model import BlockLayout, InstrumentalVar1

model = InstrumentalVar1.from_blocks(BlockLayout(1, 1, 1, 1), dict(II=0.5, HH=0.5, XI=0.5, XH=0.5, XX=0.3,
                                                                   XY=0.2, YH=0.5, YX=0.4, YY=0.3))
windows = {
    "conditional IV": [("I1", -3), ("I1", -2), ("X1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)],
    "nuisance IV, 3 lags": [("I1", -4), ("I1", -3), ("I1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)],
}
for name, M in windows.items():
    g = project_window(model.params, M, history=30)
    print(f"--- {name} ---")
    print(g.to_dot())
    node = {g.node_label(v): v for v in g.nodes}
    if name == "conditional IV":
        rep = check_conditions(g, {node["I1_t-2"]}, {node["X1_t-1"]}, {node["I1_t-3"]}, node["Y1_t"])
    else:
        rep = check_conditions(g, {node[f"I1_t-{k}"] for k in (2, 3, 4)}, {node["X1_t-1"], node["Y1_t-1"]},
                               set(), node["Y1_t"])
    print(f"conditions hold: {rep.holds}  {rep.to_dict()}\n")
