"""qbridge: asynchronous quantum-job orchestration on classical plumbing.

A config-driven gateway accepts submissions, a function runtime turns raw
parameters into circuit jobs on a mock quantum provider, a topic broker
decouples submission from retrieval, and a polling collector with a
threshold re-enqueue policy delivers each result to its client's own
output topic.
"""

__version__ = "0.1.0"
