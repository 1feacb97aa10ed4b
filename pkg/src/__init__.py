# Glassbox — Source Package
