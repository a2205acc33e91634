# Learners: CART tree and the four balanced ensembles
