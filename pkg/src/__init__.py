# balens: balanced ensembles for imbalanced binary outcomes
