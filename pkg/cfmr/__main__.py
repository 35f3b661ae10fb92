from cfmr.cli import main

main()
