"""Neural compensator: SE_2(3) group generation network and training."""
