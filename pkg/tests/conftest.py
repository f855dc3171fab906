import pytest

from amap import parse_network, parse_problem

SPRINKLER_TEXT = """\
network sprinkler
var Rain { t, f }
var Sprinkler { t, f }
var WetGrass { t, f }
cpt Rain { 0.2 0.8 }
cpt Sprinkler | Rain { 0.01 0.99 ; 0.4 0.6 }
cpt WetGrass | Sprinkler Rain { 0.99 0.01 ; 0.9 0.1 ; 0.8 0.2 ; 0.0 1.0 }
"""

SPRINKLER_PROBLEM_TEXT = "map Sprinkler Rain\nevidence WetGrass=t\n"

# Two MAP roots feeding an observed child. The sequential initializer picks
# A=a0 (marginally best given C=c0), then B=b0, landing on the strict local
# optimum with p(A,B,C=c0) = 0.30 while the global optimum (a1, b1) has 0.32.
# Single-variable moves from (a0, b0) only reach 0.10 and 0.05, so hill
# climbing is stuck there.
LOCAL_OPT_TEXT = """\
network trap
var A { a0, a1 }
var B { b0, b1 }
var C { c0, c1 }
cpt A { 0.45 0.55 }
cpt B | A { 0.75 0.25 ; 0.2 0.8 }
cpt C | A B { 0.888889 0.111111 ; 0.888889 0.111111 ; 0.454545 0.545455 ; 0.727273 0.272727 }
"""

LOCAL_OPT_PROBLEM_TEXT = "map A B\nevidence C=c0\n"


@pytest.fixture
def sprinkler():
    return parse_network(SPRINKLER_TEXT)


@pytest.fixture
def sprinkler_problem(sprinkler):
    return parse_problem(SPRINKLER_PROBLEM_TEXT, sprinkler)


@pytest.fixture
def trap_net():
    return parse_network(LOCAL_OPT_TEXT)


@pytest.fixture
def trap_problem(trap_net):
    return parse_problem(LOCAL_OPT_PROBLEM_TEXT, trap_net)
