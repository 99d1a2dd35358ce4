"""TabPFN behind a line-oriented JSON prediction protocol.

The server is stateless across requests: every predict request carries its
full labeled context, and the model is conditioned on it from scratch, so
interrupted clients can simply reconnect and resume.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
SERVER_NAME = "tabpfn-bridge"
