"""Regional traffic-signal control laboratory: grid road networks, exact
dominating-set partitioning into star regions, a queue-based signal
microsimulator, and a branching dueling Q-network agent."""

from ._starlight import *  # noqa: F401,F403
