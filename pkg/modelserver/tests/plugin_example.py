"""Example plugin callables used by the server tests."""


def constant_half(sequences, target, task):
    return [0.5] * len(sequences)


def always_fails(sequences, target, task):
    raise RuntimeError("internal model detail that must stay hidden")
