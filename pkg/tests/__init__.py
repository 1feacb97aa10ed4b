# Glassbox — Tests Package
