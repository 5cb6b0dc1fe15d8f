"""Multiple-fault diagnosis workbench for a three-tank hydraulic plant."""
