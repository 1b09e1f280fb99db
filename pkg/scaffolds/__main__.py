from scaffolds.cli import main

main()
