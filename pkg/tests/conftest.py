import numpy as np
import pytest

# one representative per shipped family (and the composites used in experiments)
ZOO = [
    "identity",
    "gauss:size=5,sigma=1",
    "gauss:size=2,sigma=1",
    "disk:d=5",
    "bilat:ss=2,sr=1.5",
    "bilat:ss=2,sr=0.1",
    "median:h=3,w=3",
    "median:h=2,w=2",
    "unsharp:base=[gauss:size=5,sigma=3],alpha=0.5",
    "unsharp:base=[bilat:ss=2,sr=1.5],alpha=1",
    "gamma:g=0.65",
    "sigmoid:a=0.2",
    "poster:levels=4",
    "resample:q=2",
    "resample:q=4,method=bilinear",
    "dct:q=20",
    "repeat:n=2,op=[bilat:ss=1,sr=0.5]",
    "compose:[unsharp:base=[bilat:ss=3,sr=3],alpha=1;gamma:g=0.65]",
]

# families that average neighbours and so reproduce constant images
CONSTANT_PRESERVING = [
    s for s in ZOO if s.split(":")[0] in ("identity", "gauss", "disk", "bilat", "median", "resample", "repeat")
]


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
